use ndarray::Array2;
use thiserror::Error;

use crate::chemgraph::{Element, Molecule};
use crate::curate::prediction_sites;
use crate::specparse::Nucleus;

/// Elements with their own histogram slot; everything else shares the last.
pub const ELEMENT_SLOTS: [Element; 12] = [
    Element::H,
    Element::B,
    Element::C,
    Element::N,
    Element::O,
    Element::F,
    Element::Si,
    Element::P,
    Element::S,
    Element::Cl,
    Element::Br,
    Element::I,
];
pub const SLOTS: usize = ELEMENT_SLOTS.len() + 1;

// Row layout.
pub const ELEMENT: usize = 0;
pub const DEGREE: usize = ELEMENT + SLOTS;
pub const HYDROGENS: usize = DEGREE + 1;
pub const AROMATIC: usize = HYDROGENS + 1;
pub const CHARGE: usize = AROMATIC + 1;
pub const RADIUS1: usize = CHARGE + 1;
pub const RADIUS2: usize = RADIUS1 + SLOTS;
pub const CLASS_SIZE: usize = RADIUS2 + SLOTS;
pub const H_ROW: usize = CLASS_SIZE + 1;
pub const D: usize = H_ROW + 1;

pub fn slot(e: Element) -> usize {
    ELEMENT_SLOTS
        .iter()
        .position(|&s| s == e)
        .unwrap_or(SLOTS - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("molecule has no atoms for nucleus {0}")]
    NoSuchNucleusAtoms(Nucleus),
}

/// Feature rows for one (molecule, nucleus) pair. Row `k` describes the
/// environment of atom `sites[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub nucleus: Nucleus,
    pub sites: Vec<usize>,
    pub rows: Array2<f64>,
}

impl Featurized {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Row index for each atom index of `atom_map`. Repeated atoms (the
    /// hydrogens of one heavy atom) take successive rows.
    pub fn rows_for(&self, atom_map: &[usize]) -> Option<Vec<usize>> {
        let mut used = vec![false; self.sites.len()];
        atom_map
            .iter()
            .map(|&a| {
                let k = (0..self.sites.len()).find(|&k| self.sites[k] == a && !used[k])?;
                used[k] = true;
                Some(k)
            })
            .collect()
    }
}

fn is_heavy(mol: &Molecule, i: usize) -> bool {
    mol.atom(i).element != Element::H
}

/// Features of atom `i`, ignoring whether hydrogens are graph nodes or
/// implicit counts.
pub fn atom_features(mol: &Molecule, i: usize) -> [f64; D] {
    let mut f = [0.0; D];
    let atom = mol.atom(i);
    f[ELEMENT + slot(atom.element)] = 1.0;
    let heavy: Vec<usize> = mol
        .neighbors(i)
        .iter()
        .map(|&(j, _)| j)
        .filter(|&j| is_heavy(mol, j))
        .collect();
    f[DEGREE] = heavy.len() as f64;
    f[HYDROGENS] = mol.total_h(i) as f64;
    f[AROMATIC] = f64::from(u8::from(atom.aromatic));
    f[CHARGE] = f64::from(atom.formal_charge);
    f[RADIUS1 + slot(Element::H)] = mol.total_h(i) as f64;
    for &j in &heavy {
        f[RADIUS1 + slot(mol.atom(j).element)] += 1.0;
        f[RADIUS2 + slot(Element::H)] += mol.total_h(j) as f64;
        // walks i -> j -> k that do not step back to i
        for &(k, _) in mol.neighbors(j) {
            if k != i && is_heavy(mol, k) {
                f[RADIUS2 + slot(mol.atom(k).element)] += 1.0;
            }
        }
    }
    let class = mol.equiv_class()[i];
    f[CLASS_SIZE] = mol.equiv_class().iter().filter(|&&c| c == class).count() as f64;
    f
}

/// One row per predicted atom of `nucleus`, in the order of
/// [`prediction_sites`]. Hydrogen rows describe the attached heavy atom
/// and set the `H_ROW` flag.
pub fn featurize(mol: &Molecule, nucleus: Nucleus) -> Result<Featurized, FeatureError> {
    featurize_sites(mol, nucleus, prediction_sites(mol, nucleus))
}

/// Like [`featurize`] for an explicit site list, such as the sites of a
/// target set that excludes some hydrogens.
pub fn featurize_sites(
    mol: &Molecule,
    nucleus: Nucleus,
    sites: Vec<usize>,
) -> Result<Featurized, FeatureError> {
    if sites.is_empty() {
        return Err(FeatureError::NoSuchNucleusAtoms(nucleus));
    }
    let mut rows = Array2::zeros((sites.len(), D));
    for (k, &a) in sites.iter().enumerate() {
        let mut f = atom_features(mol, a);
        if nucleus == Nucleus::H1 {
            f[H_ROW] = 1.0;
        }
        rows.row_mut(k).assign(&ndarray::ArrayView1::from(&f[..]));
    }
    Ok(Featurized {
        nucleus,
        sites,
        rows,
    })
}

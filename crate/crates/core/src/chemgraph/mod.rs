//! Molecular graphs: a SMILES-subset parser and writer, structural
//! red-flag detection, and symmetry-equivalence classes of atoms.

mod element;
mod smiles;
mod structure;
mod symmetry;
mod writer;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use element::Element;
pub use smiles::{parse_smiles, SmilesError};
pub use structure::{classify_structure, kekulize, StructureFlags, CH_WHITELIST};
pub use symmetry::{canonical_ranks, equivalence_classes, refine_colors};
pub use writer::{canonical_smiles, write_smiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer contribution to valence, counting aromatic bonds as one.
    pub fn base_valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    #[serde(default)]
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket atom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
    #[serde(default)]
    pub aromatic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotope_label: Option<u16>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: None,
            implicit_h: 0,
            aromatic: false,
            isotope_label: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, i: usize) -> usize {
        if self.a == i {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {0} references atom {1}, which does not exist")]
    DanglingBond(usize, usize),
    #[error("bond {0} joins atom {1} to itself")]
    SelfBond(usize, usize),
    #[error("atoms {0} and {1} are bonded more than once")]
    DuplicateBond(usize, usize),
}

#[derive(Serialize, Deserialize)]
struct MoleculeRepr {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    #[serde(default)]
    stereo_ignored: bool,
}

/// Atoms and bonds of one (possibly multi-fragment) structure.
///
/// Adjacency and equivalence classes are derived data and are rebuilt on
/// deserialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MoleculeRepr", into = "MoleculeRepr")]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, BondOrder)>>,
    stereo_ignored: bool,
    classes: OnceLock<Vec<usize>>,
}

impl TryFrom<MoleculeRepr> for Molecule {
    type Error = GraphError;

    fn try_from(r: MoleculeRepr) -> Result<Self, Self::Error> {
        let mut m = Molecule::new(r.atoms, r.bonds)?;
        m.stereo_ignored = r.stereo_ignored;
        Ok(m)
    }
}

impl From<Molecule> for MoleculeRepr {
    fn from(m: Molecule) -> Self {
        MoleculeRepr {
            atoms: m.atoms,
            bonds: m.bonds,
            stereo_ignored: m.stereo_ignored,
        }
    }
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
            && self.bonds == other.bonds
            && self.stereo_ignored == other.stereo_ignored
    }
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (k, bond) in bonds.iter().enumerate() {
            for end in [bond.a, bond.b] {
                if end >= n {
                    return Err(GraphError::DanglingBond(k, end));
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfBond(k, bond.a));
            }
            if adjacency[bond.a].iter().any(|&(j, _)| j == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, bond.order));
            adjacency[bond.b].push((bond.a, bond.order));
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            stereo_ignored: false,
            classes: OnceLock::new(),
        })
    }

    pub(crate) fn with_stereo_flag(mut self, ignored: bool) -> Self {
        self.stereo_ignored = ignored;
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True when stereo markers were present in the source and dropped.
    pub fn stereo_ignored(&self) -> bool {
        self.stereo_ignored
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, BondOrder)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<BondOrder> {
        self.adjacency[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, o)| o)
    }

    /// Hydrogens carried by atom `i`: implicit ones plus bonded `[H]` nodes.
    pub fn total_h(&self, i: usize) -> usize {
        let explicit_nodes = self.adjacency[i]
            .iter()
            .filter(|&&(j, _)| self.atoms[j].element == Element::H)
            .count();
        self.atoms[i].implicit_h as usize + explicit_nodes
    }

    /// Number of hydrogens in the molecule, whether implicit or explicit nodes.
    pub fn hydrogen_count(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| {
                if a.element == Element::H {
                    // counted once here; parents do not count bonded H nodes again
                    1 + a.implicit_h as usize
                } else {
                    a.implicit_h as usize
                }
            })
            .sum()
    }

    pub fn count_element(&self, element: Element) -> usize {
        self.atoms.iter().filter(|a| a.element == element).count()
    }

    pub fn atoms_of(&self, element: Element) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.atoms[i].element == element)
            .collect()
    }

    /// Connected component id per atom, numbered in order of first atom.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(i) = stack.pop() {
                for &(j, _) in &self.adjacency[i] {
                    if comp[j] == usize::MAX {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn fragment_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Symmetry-equivalence class id per atom (cached).
    pub fn equiv_class(&self) -> &[usize] {
        self.classes.get_or_init(|| equivalence_classes(self))
    }

    /// Atom indices grouped by equivalence class, restricted to `element`,
    /// ordered by class id.
    pub fn classes_of(&self, element: Element) -> Vec<Vec<usize>> {
        let classes = self.equiv_class();
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in self.atoms_of(element) {
            groups.entry(classes[i]).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Relabel atoms: atom `i` of `self` becomes atom `perm[i]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.len());
        let mut atoms = vec![Atom::new(Element::C); self.len()];
        for (i, a) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = a.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Molecule::new(atoms, bonds)
            .expect("permutation preserves validity")
            .with_stereo_flag(self.stereo_ignored)
    }
}

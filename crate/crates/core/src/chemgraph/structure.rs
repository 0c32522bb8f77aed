use serde::{Deserialize, Serialize};

use super::element::Element;
use super::{Bond, BondOrder, Molecule};

/// Elements retained for ¹H / ¹³C entries.
pub const CH_WHITELIST: [Element; 8] = [
    Element::C,
    Element::H,
    Element::O,
    Element::N,
    Element::S,
    Element::P,
    Element::F,
    Element::Cl,
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFlags {
    pub is_radical: bool,
    pub has_isotope: bool,
    /// Relative to [`CH_WHITELIST`]; only enforced for ¹H / ¹³C entries.
    pub outside_element_whitelist: bool,
    pub multi_fragment: bool,
    /// Warning only: stereo markers were present and ignored.
    pub stereo_ignored: bool,
}

pub fn classify_structure(mol: &Molecule) -> StructureFlags {
    let kek = kekulize(mol);
    let is_radical = (0..mol.len()).any(|i| {
        let atom = mol.atom(i);
        let allowed = atom.element.valences(atom.formal_charge);
        if allowed.is_empty() {
            return false;
        }
        let bonds: u32 = kek
            .iter()
            .filter(|b| b.a == i || b.b == i)
            .map(|b| b.order.base_valence() as u32)
            .sum();
        let valence = bonds + atom.implicit_h as u32;
        !allowed.iter().any(|&v| v as u32 == valence)
    });
    StructureFlags {
        is_radical,
        has_isotope: mol.atoms().iter().any(|a| a.isotope_label.is_some()),
        outside_element_whitelist: mol
            .atoms()
            .iter()
            .any(|a| !CH_WHITELIST.contains(&a.element)),
        multi_fragment: mol.fragment_count() > 1,
        stereo_ignored: mol.stereo_ignored(),
    }
}

/// Assign alternating single/double orders to aromatic bonds.
///
/// Aromatic atoms that still lack one valence unit get exactly one double
/// bond to an aromatic neighbour in the same situation. Atoms left unmatched
/// keep only single bonds, which surfaces as a valence error in
/// [`classify_structure`].
pub fn kekulize(mol: &Molecule) -> Vec<Bond> {
    let n = mol.len();
    let needs: Vec<bool> = (0..n).map(|i| needs_double(mol, i)).collect();
    let mut mate = vec![usize::MAX; n];
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if !needs[i] {
                return Vec::new();
            }
            mol.neighbors(i)
                .iter()
                .filter(|&&(j, o)| o == BondOrder::Aromatic && needs[j])
                .map(|&(j, _)| j)
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).filter(|&i| needs[i]).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));
    let mut budget = 200_000usize;
    if !match_all(&order, &candidates, &mut mate, &mut budget) {
        // no perfect matching: keep a greedy maximal one
        mate.fill(usize::MAX);
        for &i in &order {
            if mate[i] != usize::MAX {
                continue;
            }
            if let Some(&j) = candidates[i].iter().find(|&&j| mate[j] == usize::MAX) {
                mate[i] = j;
                mate[j] = i;
            }
        }
    }
    mol.bonds()
        .iter()
        .map(|b| {
            let order = if b.order == BondOrder::Aromatic {
                if mate[b.a] == b.b {
                    BondOrder::Double
                } else {
                    BondOrder::Single
                }
            } else {
                b.order
            };
            Bond { order, ..*b }
        })
        .collect()
}

fn needs_double(mol: &Molecule, i: usize) -> bool {
    let atom = mol.atom(i);
    if !atom.aromatic {
        return false;
    }
    let used: u32 = mol
        .neighbors(i)
        .iter()
        .map(|&(_, o)| o.base_valence() as u32)
        .sum::<u32>()
        + mol.atom(i).implicit_h as u32;
    let allowed = atom.element.valences(atom.formal_charge);
    allowed
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= used)
        .is_some_and(|v| v > used)
}

fn match_all(
    order: &[usize],
    candidates: &[Vec<usize>],
    mate: &mut [usize],
    budget: &mut usize,
) -> bool {
    let Some(pos) = order.iter().position(|&i| mate[i] == usize::MAX) else {
        return true;
    };
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let i = order[pos];
    for &j in &candidates[i] {
        if mate[j] != usize::MAX {
            continue;
        }
        mate[i] = j;
        mate[j] = i;
        if match_all(&order[pos + 1..], candidates, mate, budget) {
            return true;
        }
        mate[i] = usize::MAX;
        mate[j] = usize::MAX;
    }
    false
}

/// Rewrite Kekulé-form five- and six-membered aromatic rings in aromatic
/// (lowercase) form so symmetry does not depend on which resonance
/// structure the source happened to draw.
///
/// A six-ring qualifies when every member carries a ring double bond or is
/// already aromatic; a five-ring additionally needs exactly one neutral
/// N/O/S lone-pair donor. Rings with exocyclic double bonds are left alone.
/// Fused systems are handled by iterating to a fixed point.
pub(crate) fn perceive_aromaticity(mol: Molecule) -> Molecule {
    let rings = small_rings(&mol);
    if rings.is_empty() {
        return mol;
    }
    let stereo = mol.stereo_ignored();
    let mut atoms = mol.atoms().to_vec();
    let mut bonds = mol.bonds().to_vec();
    let bond_index = |bonds: &[Bond], i: usize, j: usize| {
        bonds
            .iter()
            .position(|b| (b.a == i && b.b == j) || (b.a == j && b.b == i))
            .expect("ring edge is a bond")
    };

    let mut changed = true;
    let mut done = vec![false; rings.len()];
    while changed {
        changed = false;
        for (r, ring) in rings.iter().enumerate() {
            if done[r] {
                continue;
            }
            let len = ring.len();
            let edges: Vec<usize> = (0..len)
                .map(|k| bond_index(&bonds, ring[k], ring[(k + 1) % len]))
                .collect();
            if edges.iter().all(|&e| bonds[e].order == BondOrder::Aromatic) {
                done[r] = true;
                continue;
            }
            let mut pi_ok = 0;
            let mut donors = 0;
            let mut disqualified = false;
            for (k, &i) in ring.iter().enumerate() {
                let in_ring_double = [edges[k], edges[(k + len - 1) % len]]
                    .iter()
                    .any(|&e| bonds[e].order == BondOrder::Double);
                let exo_double = bonds.iter().enumerate().any(|(e, b)| {
                    (b.a == i || b.b == i) && !edges.contains(&e) && b.order == BondOrder::Double
                });
                let ring_element = matches!(
                    atoms[i].element,
                    Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
                );
                if exo_double || !ring_element {
                    disqualified = true;
                    break;
                }
                if in_ring_double || atoms[i].aromatic {
                    pi_ok += 1;
                } else if len == 5 && is_donor(&mol, &atoms, i) {
                    donors += 1;
                } else {
                    disqualified = true;
                    break;
                }
            }
            if disqualified {
                continue;
            }
            let aromatic = (len == 6 && pi_ok == 6) || (len == 5 && pi_ok == 4 && donors == 1);
            if aromatic {
                for &i in ring {
                    atoms[i].aromatic = true;
                }
                for &e in &edges {
                    bonds[e].order = BondOrder::Aromatic;
                }
                done[r] = true;
                changed = true;
            }
        }
    }
    Molecule::new(atoms, bonds)
        .expect("aromaticity perception keeps the graph valid")
        .with_stereo_flag(stereo)
}

fn is_donor(mol: &Molecule, atoms: &[super::Atom], i: usize) -> bool {
    let a = &atoms[i];
    if a.formal_charge != 0 || a.aromatic {
        return false;
    }
    let all_single = mol
        .neighbors(i)
        .iter()
        .all(|&(_, o)| o == BondOrder::Single);
    let connections = mol.degree(i) + a.implicit_h as usize;
    all_single
        && match a.element {
            Element::N => connections == 3,
            Element::O | Element::S => connections == 2,
            _ => false,
        }
}

/// Simple cycles of length 5 and 6, each listed once in traversal order.
fn small_rings(mol: &Molecule) -> Vec<Vec<usize>> {
    let mut rings = Vec::new();
    let n = mol.len();
    for start in 0..n {
        let mut path = vec![start];
        extend_ring(mol, start, &mut path, &mut rings);
    }
    rings
}

fn extend_ring(mol: &Molecule, start: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    for &(j, _) in mol.neighbors(last) {
        if j == start && path.len() >= 5 && path[1] < path[path.len() - 1] {
            out.push(path.clone());
            continue;
        }
        if j <= start || path.contains(&j) || path.len() >= 6 {
            continue;
        }
        path.push(j);
        extend_ring(mol, start, path, out);
        path.pop();
    }
}

//! Atom equivalence by iterated colour refinement (1-WL / Morgan style).
//!
//! Colours are dense ranks of sorted signatures, never first-occurrence
//! labels, so relabelling the input atoms permutes the output identically.

use super::Molecule;

type Signature = (usize, Vec<(u8, usize)>);

fn initial_colors(mol: &Molecule) -> Vec<usize> {
    let keys: Vec<_> = (0..mol.len())
        .map(|i| {
            let a = mol.atom(i);
            (
                a.element,
                a.formal_charge,
                a.implicit_h,
                a.aromatic,
                mol.degree(i),
                a.isotope_label,
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<T: Ord + Clone>(keys: &[T]) -> Vec<usize> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(colors: &[usize]) -> usize {
    colors.iter().max().map_or(0, |m| m + 1)
}

fn refine_once(mol: &Molecule, colors: &[usize]) -> Vec<usize> {
    let sigs: Vec<Signature> = (0..mol.len())
        .map(|i| {
            let mut nb: Vec<(u8, usize)> = mol
                .neighbors(i)
                .iter()
                .map(|&(j, order)| (order as u8, colors[j]))
                .collect();
            nb.sort_unstable();
            (colors[i], nb)
        })
        .collect();
    dense_ranks(&sigs)
}

/// Refine `colors` until the number of classes stops growing.
pub fn refine_colors(mol: &Molecule, mut colors: Vec<usize>) -> Vec<usize> {
    loop {
        let next = refine_once(mol, &colors);
        if class_count(&next) == class_count(&colors) {
            return next;
        }
        colors = next;
    }
}

/// Stable colour-refinement classes. Equal ids mark atoms that are
/// candidates for sharing a chemical shift.
pub fn equivalence_classes(mol: &Molecule) -> Vec<usize> {
    refine_colors(mol, initial_colors(mol))
}

/// A total order on atoms: equivalence classes broken by repeatedly
/// individualizing the lowest-index atom of the first tied class and
/// refining again.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    let mut colors = equivalence_classes(mol);
    let n = mol.len();
    while class_count(&colors) < n {
        let mut sizes = vec![0usize; n];
        for &c in &colors {
            sizes[c] += 1;
        }
        let tied = (0..n).find(|&c| sizes[c] > 1).expect("some class is tied");
        let pick = (0..n).find(|&i| colors[i] == tied).unwrap();
        // doubling keeps existing order; the picked atom sorts ahead of its class
        let split: Vec<usize> = (0..n)
            .map(|i| 2 * colors[i] + usize::from(colors[i] == tied && i != pick))
            .collect();
        colors = refine_colors(mol, dense_ranks(&split));
    }
    colors
}

use std::fmt::Write as _;

use super::smiles::default_implicit_h;
use super::symmetry::canonical_ranks;
use super::{BondOrder, Molecule};

/// SMILES with atoms visited in index order.
pub fn write_smiles(mol: &Molecule) -> String {
    let order: Vec<usize> = (0..mol.len()).collect();
    write_with_ranks(mol, &order)
}

/// SMILES with atoms visited in canonical-rank order; equal for
/// isomorphic inputs (up to the limits of colour refinement).
pub fn canonical_smiles(mol: &Molecule) -> String {
    write_with_ranks(mol, &canonical_ranks(mol))
}

fn write_with_ranks(mol: &Molecule, ranks: &[usize]) -> String {
    let n = mol.len();
    let sorted_nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = mol.neighbors(i).iter().map(|&(j, _)| j).collect();
            v.sort_by_key(|&j| ranks[j]);
            v
        })
        .collect();

    // First pass: DFS tree, collecting ring-closure edges per atom.
    let mut visited = vec![false; n];
    let mut tree_children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut ring_edges: Vec<(usize, usize)> = Vec::new();
    let mut roots = Vec::new();
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| ranks[i]);
    for &s in &starts {
        if visited[s] {
            continue;
        }
        roots.push(s);
        let mut stack = vec![(s, usize::MAX)];
        let mut on_path_parent = vec![usize::MAX; n];
        // iterative DFS that records the order children are entered
        visited[s] = true;
        let mut iters = vec![0usize; n];
        on_path_parent[s] = usize::MAX;
        while let Some(&(v, parent)) = stack.last() {
            if iters[v] < sorted_nbrs[v].len() {
                let w = sorted_nbrs[v][iters[v]];
                iters[v] += 1;
                if w == parent {
                    continue;
                }
                if !visited[w] {
                    visited[w] = true;
                    tree_children[v].push(w);
                    on_path_parent[w] = v;
                    stack.push((w, v));
                } else if !ring_edges.contains(&(w, v)) && !tree_children[w].contains(&v) {
                    ring_edges.push((v, w));
                }
            } else {
                stack.pop();
            }
        }
    }

    // Ring labels are assigned when the opening atom is written.
    let mut out = String::new();
    let mut free_labels: Vec<u32> = Vec::new();
    let mut next_label = 1u32;
    let mut open: Vec<((usize, usize), u32)> = Vec::new();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(
            mol,
            root,
            &tree_children,
            &ring_edges,
            &mut open,
            &mut free_labels,
            &mut next_label,
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    v: usize,
    children: &[Vec<usize>],
    ring_edges: &[(usize, usize)],
    open: &mut Vec<((usize, usize), u32)>,
    free: &mut Vec<u32>,
    next_label: &mut u32,
    out: &mut String,
) {
    out.push_str(&atom_token(mol, v));

    // closures: edges (v, w) where w was written earlier close here;
    // edges (w, v) recorded from the far side open here
    for &(a, b) in ring_edges {
        if a == v || b == v {
            let other = if a == v { b } else { a };
            if let Some(pos) = open.iter().position(|&(e, _)| e == (a, b)) {
                let (_, label) = open.remove(pos);
                out.push_str(bond_token(mol, v, other));
                push_label(out, label);
                free.push(label);
                free.sort_unstable_by(|x, y| y.cmp(x));
            } else {
                let label = free.pop().unwrap_or_else(|| {
                    let l = *next_label;
                    *next_label += 1;
                    l
                });
                out.push_str(bond_token(mol, v, other));
                push_label(out, label);
                open.push(((a, b), label));
            }
        }
    }

    let kids = &children[v];
    for (k, &w) in kids.iter().enumerate() {
        let branch = k + 1 < kids.len();
        if branch {
            out.push('(');
        }
        out.push_str(bond_token(mol, v, w));
        emit(mol, w, children, ring_edges, open, free, next_label, out);
        if branch {
            out.push(')');
        }
    }
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        let _ = write!(out, "{label}");
    } else {
        let _ = write!(out, "%{label:02}");
    }
}

fn bond_token(mol: &Molecule, a: usize, b: usize) -> &'static str {
    let both_aromatic = mol.atom(a).aromatic && mol.atom(b).aromatic;
    match mol.bond_between(a, b).expect("bonded") {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_token(mol: &Molecule, i: usize) -> String {
    let a = mol.atom(i);
    let symbol = if a.aromatic {
        a.element.symbol().to_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    let plain = a.element.is_organic_subset()
        && a.formal_charge == 0
        && a.isotope_label.is_none()
        && default_implicit_h(mol, i) == a.implicit_h;
    if plain {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope_label {
        let _ = write!(s, "{iso}");
    }
    s.push_str(&symbol);
    match a.implicit_h {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => {
            let _ = write!(s, "+{q}");
        }
        q => {
            let _ = write!(s, "-{}", -q);
        }
    }
    s.push(']');
    s
}

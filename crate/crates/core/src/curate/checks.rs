use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{hydrogen_sites, Direction, TargetShiftSet, ValidityConfig, Verdict};
use crate::chemgraph::{classify_structure, Element, Molecule};
use crate::specparse::{peak_shift, Nucleus, SolventClass, Spectrum};

const STRUCTURE: &str = "structure";
const VALIDITY: &str = "nmr_validity";
const CONSISTENCY: &str = "consistency";

/// Structure red flags, checked in a fixed order. The element whitelist
/// applies only when a ¹H or ¹³C spectrum accompanies the structure.
pub fn check_structure(mol: &Molecule, nuclei: &[Nucleus]) -> Verdict {
    let f = classify_structure(mol);
    let ch = nuclei.iter().any(|n| matches!(n, Nucleus::H1 | Nucleus::C13));
    if f.has_isotope {
        Verdict::fail(STRUCTURE, "has_isotope", "isotope label present")
    } else if f.is_radical {
        Verdict::fail(STRUCTURE, "is_radical", "atom outside its standard valences")
    } else if f.multi_fragment {
        Verdict::fail(
            STRUCTURE,
            "multi_fragment",
            format!("{} disconnected fragments", mol.fragment_count()),
        )
    } else if ch && f.outside_element_whitelist {
        Verdict::fail(
            STRUCTURE,
            "outside_element_whitelist",
            "element outside C, H, O, N, S, P, F, Cl",
        )
    } else {
        Verdict::pass(STRUCTURE)
    }
}

/// Monotone order of representative shifts, then the shift window on both
/// ends of every peak, then peak width.
pub fn check_nmr_validity(spec: &Spectrum, cfg: &ValidityConfig) -> Verdict {
    let shifts = spec.shifts();
    if let Some((k, dir)) = monotone_violation(&shifts, cfg.monotonic_direction) {
        return Verdict::fail(
            VALIDITY,
            "monotonic",
            format!(
                "peak {k} at {} breaks {dir} order after {}",
                shifts[k],
                shifts[k - 1]
            ),
        )
        .at_peak(k);
    }
    let (lo, hi) = cfg.range(spec.nucleus);
    for (k, p) in spec.peaks.iter().enumerate() {
        if p.shift_low < lo || p.shift_high > hi {
            return Verdict::fail(
                VALIDITY,
                "range",
                format!(
                    "peak {k} spans [{}, {}], outside [{lo}, {hi}] for {}",
                    p.shift_low, p.shift_high, spec.nucleus
                ),
            )
            .at_peak(k);
        }
    }
    let max = cfg.width(spec.nucleus);
    for (k, p) in spec.peaks.iter().enumerate() {
        if p.width() > max {
            return Verdict::fail(
                VALIDITY,
                "width",
                format!("peak {k} is {} ppm wide, limit {max}", p.width()),
            )
            .at_peak(k);
        }
    }
    Verdict::pass(VALIDITY)
}

/// First index breaking the order, and the order it breaks. Equal
/// neighbours never break it.
fn monotone_violation(shifts: &[f64], dir: Direction) -> Option<(usize, &'static str)> {
    let mut ascending = match dir {
        Direction::Ascending => Some(true),
        Direction::Descending => Some(false),
        Direction::Either => None,
    };
    for k in 1..shifts.len() {
        let (a, b) = (shifts[k - 1], shifts[k]);
        if a == b {
            continue;
        }
        let up = b > a;
        match ascending {
            None => ascending = Some(up),
            Some(asc) if asc != up => {
                return Some((k, if asc { "ascending" } else { "descending" }));
            }
            Some(_) => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("¹H peak {peak} has no integration")]
    MissingIntegration { peak: usize },
}

/// A heteroatom shift assigned to every atom of one equivalence class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub nucleus: Nucleus,
    pub atoms: Vec<usize>,
    pub shift: f64,
    pub solvent_class: SolventClass,
}

impl LabeledRecord {
    pub fn into_target(self) -> TargetShiftSet {
        TargetShiftSet {
            nucleus: self.nucleus,
            shifts: vec![self.shift; self.atoms.len()],
            sites: self.atoms.clone(),
            atom_map: Some(self.atoms),
            solvent_class: self.solvent_class,
        }
    }
}

/// Some iff the molecule has exactly one equivalence class of the
/// spectrum's element and the spectrum has exactly one peak.
pub fn extract_heteroatom_label(mol: &Molecule, spec: &Spectrum) -> Option<LabeledRecord> {
    if !spec.nucleus.is_heteroatom() || spec.peaks.len() != 1 {
        return None;
    }
    let classes = mol.classes_of(spec.nucleus.element());
    if classes.len() != 1 {
        return None;
    }
    Some(LabeledRecord {
        nucleus: spec.nucleus,
        atoms: classes.into_iter().next().unwrap(),
        shift: peak_shift(&spec.peaks[0]),
        solvent_class: spec.solvent_class,
    })
}

/// Matches the spectrum against the structure and, on success, expands
/// the peaks into one target shift per predicted atom.
pub fn check_consistency(
    mol: &Molecule,
    spec: &Spectrum,
    cfg: &ValidityConfig,
) -> Result<(Verdict, Option<TargetShiftSet>), ConsistencyError> {
    Ok(match spec.nucleus {
        Nucleus::C13 => carbon(mol, spec, cfg.lenient),
        Nucleus::H1 => hydrogen(mol, spec, cfg.lenient)?,
        _ => match extract_heteroatom_label(mol, spec) {
            Some(rec) => (Verdict::pass(CONSISTENCY), Some(rec.into_target())),
            None => {
                let classes = mol.classes_of(spec.nucleus.element()).len();
                let detail = format!(
                    "{} peaks vs {classes} {} classes; need exactly one of each",
                    spec.peaks.len(),
                    spec.nucleus.element().symbol()
                );
                (Verdict::fail(CONSISTENCY, "heteroatom_label", detail), None)
            }
        },
    })
}

fn target(spec: &Spectrum, mut shifts: Vec<f64>, mut sites: Vec<usize>) -> TargetShiftSet {
    shifts.sort_by(f64::total_cmp);
    sites.sort_unstable();
    TargetShiftSet {
        nucleus: spec.nucleus,
        shifts,
        sites,
        atom_map: None,
        solvent_class: spec.solvent_class,
    }
}

fn carbon(mol: &Molecule, spec: &Spectrum, lenient: bool) -> (Verdict, Option<TargetShiftSet>) {
    let mut classes = mol.classes_of(Element::C);
    let peaks = spec.peaks.len();
    if peaks != classes.len() {
        let detail = format!("{peaks} peaks vs {} carbon classes", classes.len());
        return (Verdict::fail(CONSISTENCY, "carbon_count", detail), None);
    }
    let uniform = classes.windows(2).all(|w| w[0].len() == w[1].len());
    if !uniform && peaks > 1 && !lenient {
        let sizes: Vec<usize> = classes.iter().map(Vec::len).collect();
        let detail = format!("carbon class sizes {sizes:?} differ; peak pairing is ambiguous");
        return (Verdict::fail(CONSISTENCY, "unequal_class_sizes", detail), None);
    }
    // larger classes take lower shifts; class id breaks size ties
    classes.sort_by(|a, b| b.len().cmp(&a.len()));
    let mut shifts = spec.shifts();
    shifts.sort_by(f64::total_cmp);
    let mut expanded = Vec::new();
    for (class, &s) in classes.iter().zip(&shifts) {
        expanded.extend(std::iter::repeat_n(s, class.len()));
    }
    let sites = mol.atoms_of(Element::C);
    (Verdict::pass(CONSISTENCY), Some(target(spec, expanded, sites)))
}

fn hydrogen(
    mol: &Molecule,
    spec: &Spectrum,
    lenient: bool,
) -> Result<(Verdict, Option<TargetShiftSet>), ConsistencyError> {
    let mut expanded = Vec::new();
    for (k, p) in spec.peaks.iter().enumerate() {
        let n = p.integration.ok_or(ConsistencyError::MissingIntegration { peak: k })?;
        expanded.extend(std::iter::repeat_n(peak_shift(p), n as usize));
    }
    let mut sites = hydrogen_sites(mol);
    let (have, want) = (expanded.len(), sites.len());
    if have == want {
        return Ok((Verdict::pass(CONSISTENCY), Some(target(spec, expanded, sites))));
    }
    let exchangeable = exchangeable_sites(mol);
    if lenient && have < want && want - have <= exchangeable.len() {
        for &parent in &exchangeable[..want - have] {
            let pos = sites.iter().position(|&s| s == parent).unwrap();
            sites.remove(pos);
        }
        return Ok((Verdict::pass(CONSISTENCY), Some(target(spec, expanded, sites))));
    }
    let detail = format!(
        "integrations sum to {have}, molecule has {want} hydrogens ({} on O/N)",
        exchangeable.len()
    );
    Ok((Verdict::fail(CONSISTENCY, "hydrogen_count", detail), None))
}

/// Parent atom of every O- or N-bound hydrogen, O before N, then by index.
fn exchangeable_sites(mol: &Molecule) -> Vec<usize> {
    let sites = hydrogen_sites(mol);
    let mut out = Vec::new();
    for el in [Element::O, Element::N] {
        out.extend(sites.iter().filter(|&&s| mol.atom(s).element == el));
    }
    out
}

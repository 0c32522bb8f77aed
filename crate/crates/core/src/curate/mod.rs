//! Three-stage filtering of (structure, spectrum) pairs into training
//! targets: structure red flags, NMR validity, then structure/spectrum
//! consistency. Accepted entries are stored as JSON Lines.

mod checks;
mod config;
mod dataset;
mod pipeline;
mod split;

use serde::{Deserialize, Serialize};

use crate::chemgraph::{Element, Molecule};
use crate::specparse::{Nucleus, SolventClass, Spectrum};

pub use checks::{
    check_consistency, check_nmr_validity, check_structure, extract_heteroatom_label,
    ConsistencyError, LabeledRecord,
};
pub use config::{ConfigError, Direction, ValidityConfig, DEFAULT_RANGES};
pub use dataset::{
    dataset_stats, read_dataset, write_dataset, DatasetError, DatasetStats, NucleusStats, SCHEMA,
};
pub use pipeline::{
    read_tsv, run_pipeline, CurationOutput, CurationReport, RawEntry, Rejection, StageCounts,
    TsvError,
};
pub use split::{split_dataset, split_indices};

/// Outcome of one check. Failed verdicts name the violated rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Stage: `structure`, `nmr_validity` or `consistency`.
    pub check: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Index into the entry's spectra, for per-spectrum checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak: Option<usize>,
    pub detail: String,
}

impl Verdict {
    pub fn pass(check: &str) -> Self {
        Verdict {
            check: check.to_string(),
            passed: true,
            rule: None,
            spectrum: None,
            peak: None,
            detail: String::new(),
        }
    }

    pub fn fail(check: &str, rule: &str, detail: impl Into<String>) -> Self {
        Verdict {
            check: check.to_string(),
            passed: false,
            rule: Some(rule.to_string()),
            spectrum: None,
            peak: None,
            detail: detail.into(),
        }
    }

    fn at_peak(mut self, peak: usize) -> Self {
        self.peak = Some(peak);
        self
    }

    fn for_spectrum(mut self, i: usize) -> Self {
        self.spectrum = Some(i);
        self
    }
}

/// Observed shifts for one (molecule, nucleus) pair, one entry per
/// predicted atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetShiftSet {
    pub nucleus: Nucleus,
    /// Sorted ascending.
    pub shifts: Vec<f64>,
    /// Atom whose environment each predicted nucleus sits in, ascending:
    /// the carbon itself for ¹³C, the attached heavy atom for ¹H.
    pub sites: Vec<usize>,
    /// Aligned with `shifts`; present only for assigned data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_map: Option<Vec<usize>>,
    pub solvent_class: SolventClass,
}

impl TargetShiftSet {
    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.atom_map.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub smiles: String,
    pub molecule: Molecule,
    pub spectra: Vec<Spectrum>,
    pub targets: Vec<TargetShiftSet>,
    pub labeled: bool,
    pub verdicts: Vec<Verdict>,
    pub provenance: String,
}

impl DatasetEntry {
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Hydrogens of the molecule, each reported as the heavy atom it is
/// attached to (a bare `[H]` node with no heavy neighbour reports itself).
/// Ascending, with one entry per hydrogen.
pub fn hydrogen_sites(mol: &Molecule) -> Vec<usize> {
    let mut sites = Vec::with_capacity(mol.hydrogen_count());
    for i in 0..mol.len() {
        let a = mol.atom(i);
        if a.element == Element::H {
            let parent = mol
                .neighbors(i)
                .iter()
                .map(|&(j, _)| j)
                .find(|&j| mol.atom(j).element != Element::H)
                .unwrap_or(i);
            sites.push(parent);
        }
        for _ in 0..a.implicit_h {
            sites.push(i);
        }
    }
    sites.sort_unstable();
    sites
}

/// Atoms whose shifts a model predicts for `nucleus`, as in
/// [`TargetShiftSet::sites`].
pub fn prediction_sites(mol: &Molecule, nucleus: Nucleus) -> Vec<usize> {
    match nucleus {
        Nucleus::H1 => hydrogen_sites(mol),
        n => mol.atoms_of(n.element()),
    }
}

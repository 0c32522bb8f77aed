use ndarray::Array2;
use thiserror::Error;

use crate::chemgraph::canonical_smiles;
use crate::curate::DatasetEntry;
use crate::shiftnet::{featurize_sites, FeatureError};
use crate::specparse::{Nucleus, SolventClass};

/// One (molecule, nucleus) training or evaluation item.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Canonical SMILES of the molecule.
    pub key: String,
    pub rows: Array2<f64>,
    /// Sorted ascending, one per row.
    pub targets: Vec<f64>,
    /// `targets[k]` belongs to row `atom_rows[k]`; present for assigned data.
    pub atom_rows: Option<Vec<usize>>,
    /// Training class: CDCl3, DMSO-d6 or Other.
    pub solvent: SolventClass,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.atom_rows.is_some()
    }

    /// The same item with its atom assignment discarded.
    pub fn unassigned(&self) -> Sample {
        Sample {
            atom_rows: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("entry {id}: {source}")]
    Features { id: String, source: FeatureError },
    #[error("entry {id}: {targets} targets for {rows} predicted atoms")]
    CountMismatch {
        id: String,
        targets: usize,
        rows: usize,
    },
    #[error("entry {id}: atom map does not fit the predicted atoms")]
    BadAtomMap { id: String },
}

/// Samples for every target set of `nucleus` in accepted entries.
/// Unassigned copies are produced when `keep_labels` is false.
pub fn samples_from_entries(
    entries: &[DatasetEntry],
    nucleus: Nucleus,
    keep_labels: bool,
) -> Result<Vec<Sample>, DataError> {
    let mut out = Vec::new();
    for e in entries.iter().filter(|e| e.accepted()) {
        let key = canonical_smiles(&e.molecule);
        for t in e.targets.iter().filter(|t| t.nucleus == nucleus) {
            let f = featurize_sites(&e.molecule, nucleus, t.sites.clone()).map_err(|source| {
                DataError::Features {
                    id: e.id.clone(),
                    source,
                }
            })?;
            if f.len() != t.len() {
                return Err(DataError::CountMismatch {
                    id: e.id.clone(),
                    targets: t.len(),
                    rows: f.len(),
                });
            }
            let atom_rows = match (&t.atom_map, keep_labels) {
                (Some(map), true) => Some(
                    f.rows_for(map)
                        .ok_or_else(|| DataError::BadAtomMap { id: e.id.clone() })?,
                ),
                _ => None,
            };
            out.push(Sample {
                key: key.clone(),
                rows: f.rows,
                targets: t.shifts.clone(),
                atom_rows,
                solvent: t.solvent_class.training_class(),
            });
        }
    }
    Ok(out)
}

/// Every target value, for fitting the output normalization.
pub fn all_targets<'a>(sets: impl IntoIterator<Item = &'a [Sample]>) -> Vec<f64> {
    sets.into_iter()
        .flatten()
        .flat_map(|s| s.targets.iter().copied())
        .collect()
}

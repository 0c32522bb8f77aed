use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Sample;
use crate::setloss::{sorted_loss, LossKind};
use crate::shiftnet::{ModelError, ToyModel};
use crate::specparse::SolventClass;

pub const EVAL_SCHEMA: &str = "shiftlit.eval_report";
pub const EVAL_VERSION: u32 = 1;

/// The three solvent classes a model distinguishes.
pub const SOLVENT_CLASSES: [SolventClass; 3] =
    [SolventClass::CDCl3, SolventClass::DmsoD6, SolventClass::Other];

/// Micro-averaged errors over atoms. `*_atom` pair predictions with
/// targets through the atom assignment (assigned samples only); `*_mol`
/// use the optimal matching per molecule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub molecules: usize,
    pub atoms: usize,
    pub labeled_molecules: usize,
    pub labeled_atoms: usize,
    pub mae_atom: Option<f64>,
    pub rmse_atom: Option<f64>,
    pub mae_mol: Option<f64>,
    pub rmse_mol: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Sums {
    molecules: usize,
    atoms: usize,
    labeled_molecules: usize,
    labeled_atoms: usize,
    abs_atom: f64,
    sq_atom: f64,
    abs_mol: f64,
    sq_mol: f64,
}

impl Sums {
    fn add(&mut self, s: &Sample, preds: &[f64]) {
        self.molecules += 1;
        self.atoms += s.len();
        self.abs_mol += sorted_loss(&LossKind::Mae, preds, &s.targets).expect("lengths").loss;
        self.sq_mol += sorted_loss(&LossKind::Mse, preds, &s.targets).expect("lengths").loss;
        if let Some(map) = &s.atom_rows {
            self.labeled_molecules += 1;
            self.labeled_atoms += s.len();
            for (&r, &t) in map.iter().zip(&s.targets) {
                let d = preds[r] - t;
                self.abs_atom += d.abs();
                self.sq_atom += d * d;
            }
        }
    }

    fn metrics(&self) -> Metrics {
        let avg = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
        Metrics {
            molecules: self.molecules,
            atoms: self.atoms,
            labeled_molecules: self.labeled_molecules,
            labeled_atoms: self.labeled_atoms,
            mae_atom: avg(self.abs_atom, self.labeled_atoms),
            rmse_atom: avg(self.sq_atom, self.labeled_atoms).map(f64::sqrt),
            mae_mol: avg(self.abs_mol, self.atoms),
            rmse_mol: avg(self.sq_mol, self.atoms).map(f64::sqrt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusReport {
    pub overall: Metrics,
    pub by_solvent: BTreeMap<String, Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub version: u32,
    pub nuclei: BTreeMap<String, NucleusReport>,
}

/// Predictions for every sample, computed in parallel and returned in
/// input order.
pub fn predict_all(model: &ToyModel, samples: &[Sample]) -> Result<Vec<Vec<f64>>, ModelError> {
    samples
        .par_iter()
        .map(|s| model.predict(s.rows.view(), s.solvent))
        .collect()
}

pub fn metrics(samples: &[Sample], preds: &[Vec<f64>]) -> Metrics {
    let mut sums = Sums::default();
    for (s, p) in samples.iter().zip(preds) {
        sums.add(s, p);
    }
    sums.metrics()
}

pub fn evaluate(model: &ToyModel, samples: &[Sample]) -> Result<EvalReport, ModelError> {
    let preds = predict_all(model, samples)?;
    let mut overall = Sums::default();
    let mut by: BTreeMap<String, Sums> = SOLVENT_CLASSES
        .iter()
        .map(|c| (c.as_str().to_string(), Sums::default()))
        .collect();
    for (s, p) in samples.iter().zip(&preds) {
        overall.add(s, p);
        by.get_mut(s.solvent.training_class().as_str())
            .expect("training class")
            .add(s, p);
    }
    let section = NucleusReport {
        overall: overall.metrics(),
        by_solvent: by.into_iter().map(|(k, v)| (k, v.metrics())).collect(),
    };
    Ok(EvalReport {
        schema: EVAL_SCHEMA.to_string(),
        version: EVAL_VERSION,
        nuclei: BTreeMap::from([(model.nucleus.as_str().to_string(), section)]),
    })
}

/// Matched-set MAE of samples whose true solvent is the row class when
/// the model is told the column class, plus the same weights with the
/// solvent parameters averaged over classes (conditioning disabled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSolventReport {
    pub classes: Vec<String>,
    pub molecules: [usize; 3],
    /// `mae[true][used]`; `None` when no sample has that true class.
    pub mae: [[Option<f64>; 3]; 3],
    pub disabled: [Option<f64>; 3],
    pub correct: Option<f64>,
    pub incorrect: Option<f64>,
}

impl CrossSolventReport {
    /// Every ordered pair `(a, b)`, `a != b`, with data has
    /// `mae[a][a] < mae[a][b]`.
    pub fn correct_tag_wins(&self) -> bool {
        (0..3).all(|a| {
            (0..3).filter(|&b| b != a).all(|b| match (self.mae[a][a], self.mae[a][b]) {
                (Some(c), Some(w)) => c < w,
                _ => true,
            })
        })
    }
}

pub fn cross_solvent_eval(
    model: &ToyModel,
    samples: &[Sample],
) -> Result<CrossSolventReport, ModelError> {
    let mut mae = [[None; 3]; 3];
    let mut molecules = [0; 3];
    let mut disabled = [None; 3];
    let plain = model.solvent_averaged();
    let (mut c_sum, mut c_n, mut i_sum, mut i_n) = (0.0, 0, 0.0, 0);
    for (t, &true_class) in SOLVENT_CLASSES.iter().enumerate() {
        let group: Vec<Sample> = samples
            .iter()
            .filter(|s| s.solvent.training_class() == true_class)
            .cloned()
            .collect();
        molecules[t] = group.len();
        if group.is_empty() {
            continue;
        }
        for (u, &used) in SOLVENT_CLASSES.iter().enumerate() {
            let tagged: Vec<Sample> = group
                .iter()
                .map(|s| Sample {
                    solvent: used,
                    ..s.clone()
                })
                .collect();
            let m = metrics(&tagged, &predict_all(model, &tagged)?);
            mae[t][u] = m.mae_mol;
            let v = m.mae_mol.unwrap_or(0.0) * m.atoms as f64;
            if t == u {
                c_sum += v;
                c_n += m.atoms;
            } else {
                i_sum += v;
                i_n += m.atoms;
            }
        }
        disabled[t] = metrics(&group, &predict_all(&plain, &group)?).mae_mol;
    }
    let avg = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(CrossSolventReport {
        classes: SOLVENT_CLASSES.iter().map(|c| c.as_str().to_string()).collect(),
        molecules,
        mae,
        disabled,
        correct: avg(c_sum, c_n),
        incorrect: avg(i_sum, i_n),
    })
}

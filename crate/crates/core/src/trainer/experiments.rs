//! Ablation, lambda sweep and solvent-conditioning experiments on the
//! synthetic benchmark. Every run trains for the same number of steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{all_targets, samples_from_entries, Sample};
use super::eval::{cross_solvent_eval, evaluate, CrossSolventReport, Metrics, SOLVENT_CLASSES};
use super::synth::{synth_generate, SynthConfig};
use super::train::{train, TrainError};
use super::TrainConfig;
use crate::shiftnet::{Normalization, Strategy, ToyModel};
use crate::specparse::Nucleus;

pub const ABLATION_SCHEMA: &str = "shiftlit.ablation";
pub const SWEEP_SCHEMA: &str = "shiftlit.lambda_sweep";
pub const SOLVENT_SCHEMA: &str = "shiftlit.solvent";
pub const REPORT_VERSION: u32 = 1;

pub const SWEEP_LAMBDAS: [f64; 6] = [0.25, 1.0, 4.0, 16.0, 64.0, 256.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    /// `seed` is replaced by each run's seed; `total_steps` should be set.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

/// Optimiser steps per run in the benchmark configurations.
pub const BENCHMARK_STEPS: usize = 1500;

impl ExperimentConfig {
    /// Default data and hyperparameters, a fixed step budget, and no
    /// solvent effect, so that only the training data differ between runs.
    pub fn ablation(seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            synth: SynthConfig {
                solvent_effect: [0.0; 3],
                ..SynthConfig::default()
            },
            train: TrainConfig {
                total_steps: Some(BENCHMARK_STEPS),
                ..TrainConfig::default()
            },
            seeds,
        }
    }

    /// As [`ExperimentConfig::ablation`] with the default solvent offsets.
    pub fn solvent(seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            ..Self::ablation(seeds)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SupervisedOnly,
    WeakOnly,
    WeakOnlyOnLabeled,
    SupervisedPlusWeakOnLabeled,
    SupervisedPlusWeak,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::SupervisedOnly,
        Regime::WeakOnly,
        Regime::WeakOnlyOnLabeled,
        Regime::SupervisedPlusWeakOnLabeled,
        Regime::SupervisedPlusWeak,
    ];

    /// (labeled stream, weak stream) for this regime.
    fn streams(self, d: &SeedData) -> (Vec<Sample>, Vec<Sample>) {
        let unassigned = || d.labeled.iter().map(Sample::unassigned).collect();
        match self {
            Regime::SupervisedOnly => (d.labeled.clone(), Vec::new()),
            Regime::WeakOnly => (Vec::new(), d.weak.clone()),
            Regime::WeakOnlyOnLabeled => (Vec::new(), unassigned()),
            Regime::SupervisedPlusWeakOnLabeled => (d.labeled.clone(), unassigned()),
            Regime::SupervisedPlusWeak => (d.labeled.clone(), d.weak.clone()),
        }
    }
}

/// Headline numbers of one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mae_atom: f64,
    pub rmse_atom: f64,
    pub mae_mol: f64,
    pub rmse_mol: f64,
}

impl Summary {
    fn of(m: &Metrics) -> Summary {
        Summary {
            mae_atom: m.mae_atom.unwrap_or(f64::NAN),
            rmse_atom: m.rmse_atom.unwrap_or(f64::NAN),
            mae_mol: m.mae_mol.unwrap_or(f64::NAN),
            rmse_mol: m.rmse_mol.unwrap_or(f64::NAN),
        }
    }

    fn mean(all: &[Summary]) -> Summary {
        let n = all.len() as f64;
        let avg = |f: fn(&Summary) -> f64| all.iter().map(f).sum::<f64>() / n;
        Summary {
            mae_atom: avg(|s| s.mae_atom),
            rmse_atom: avg(|s| s.rmse_atom),
            mae_mol: avg(|s| s.mae_mol),
            rmse_mol: avg(|s| s.rmse_mol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub regime: Regime,
    pub mean: Summary,
    pub per_seed: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, r: Regime) -> Option<&AblationRow> {
        self.rows.iter().find(|x| x.regime == r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub mean: Summary,
    pub per_seed: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    /// Seed-mean test `mae_mol` for CDCl3, DMSO-d6 and Other.
    pub mae_mol_by_solvent: [f64; 3],
    pub overall: Summary,
    /// Seed-mean `mae[true][used]` of the cross-solvent evaluation.
    pub cross_mae: [[f64; 3]; 3],
    pub cross_disabled: [f64; 3],
    pub per_seed_cross: Vec<CrossSolventReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolventReport {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub strategies: Vec<StrategyResult>,
}

impl SolventReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyResult> {
        self.strategies.iter().find(|x| x.strategy == s)
    }
}

struct SeedData {
    seed: u64,
    labeled: Vec<Sample>,
    weak: Vec<Sample>,
    test: Vec<Sample>,
    paired: Vec<Sample>,
}

fn seed_data(cfg: &SynthConfig, seed: u64) -> SeedData {
    let data = synth_generate(&SynthConfig {
        seed,
        ..cfg.clone()
    });
    let conv = |es: &[_], keep| samples_from_entries(es, Nucleus::H1, keep).expect("synthetic entries featurize");
    SeedData {
        seed,
        labeled: conv(&data.labeled, true),
        weak: conv(&data.weak, false),
        test: conv(&data.test, true),
        paired: conv(&data.paired, true),
    }
}

/// Trains one model on the given streams; the output normalization is
/// fitted to the targets the run may see.
fn run(
    cfg: &TrainConfig,
    seed: u64,
    labeled: &[Sample],
    weak: &[Sample],
) -> Result<ToyModel, TrainError> {
    let cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    let weak_used: &[Sample] = if cfg.lambda > 0.0 { weak } else { &[] };
    let norm = Normalization::fit(&all_targets([labeled, weak_used]));
    let model = ToyModel::new(cfg.model_config(), Nucleus::H1, norm, seed);
    Ok(train(&cfg, labeled, weak, model)?.model)
}

fn test_summary(model: &ToyModel, test: &[Sample]) -> Summary {
    let r = evaluate(model, test).expect("model matches features");
    Summary::of(&r.nuclei[Nucleus::H1.as_str()].overall)
}

fn per_seed<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(&SeedData) -> Result<T, TrainError> + Sync,
) -> Result<Vec<T>, TrainError> {
    cfg.seeds
        .par_iter()
        .map(|&s| f(&seed_data(&cfg.synth, s)))
        .collect()
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<AblationReport, TrainError> {
    let by_seed: Vec<Vec<Summary>> = per_seed(cfg, |d| {
        Regime::ALL
            .iter()
            .map(|&r| {
                let (l, w) = r.streams(d);
                Ok(test_summary(&run(&cfg.train, d.seed, &l, &w)?, &d.test))
            })
            .collect()
    })?;
    let rows = Regime::ALL
        .iter()
        .enumerate()
        .map(|(k, &regime)| {
            let per_seed: Vec<Summary> = by_seed.iter().map(|s| s[k]).collect();
            AblationRow {
                regime,
                mean: Summary::mean(&per_seed),
                per_seed,
            }
        })
        .collect();
    Ok(AblationReport {
        schema: ABLATION_SCHEMA.to_string(),
        version: REPORT_VERSION,
        config: cfg.clone(),
        rows,
    })
}

pub fn run_lambda_sweep(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<SweepReport, TrainError> {
    let by_seed: Vec<Vec<Summary>> = per_seed(cfg, |d| {
        lambdas
            .iter()
            .map(|&lambda| {
                let t = TrainConfig {
                    lambda,
                    ..cfg.train.clone()
                };
                Ok(test_summary(&run(&t, d.seed, &d.labeled, &d.weak)?, &d.test))
            })
            .collect()
    })?;
    let points = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let per_seed: Vec<Summary> = by_seed.iter().map(|s| s[k]).collect();
            SweepPoint {
                lambda,
                mean: Summary::mean(&per_seed),
                per_seed,
            }
        })
        .collect();
    Ok(SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        version: REPORT_VERSION,
        config: cfg.clone(),
        points,
    })
}

struct SolventRun {
    by_solvent: [f64; 3],
    overall: Summary,
    cross: CrossSolventReport,
}

pub fn run_solvent_experiment(
    cfg: &ExperimentConfig,
    strategies: &[Strategy],
) -> Result<SolventReport, TrainError> {
    let by_seed: Vec<Vec<SolventRun>> = per_seed(cfg, |d| {
        strategies
            .iter()
            .map(|&strategy| {
                let t = TrainConfig {
                    strategy,
                    ..cfg.train.clone()
                };
                let model = run(&t, d.seed, &d.labeled, &d.weak)?;
                let report = evaluate(&model, &d.test).expect("model matches features");
                let section = &report.nuclei[Nucleus::H1.as_str()];
                let by_solvent = SOLVENT_CLASSES.map(|c| {
                    section.by_solvent[c.as_str()].mae_mol.unwrap_or(f64::NAN)
                });
                let cross = cross_solvent_eval(&model, &d.paired).expect("model matches features");
                Ok(SolventRun {
                    by_solvent,
                    overall: Summary::of(&section.overall),
                    cross,
                })
            })
            .collect()
    })?;
    let n = cfg.seeds.len() as f64;
    let strategies = strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| {
            let runs: Vec<&SolventRun> = by_seed.iter().map(|s| &s[k]).collect();
            let mut by = [0.0; 3];
            let mut cross = [[0.0; 3]; 3];
            let mut disabled = [0.0; 3];
            for r in &runs {
                for a in 0..3 {
                    by[a] += r.by_solvent[a] / n;
                    disabled[a] += r.cross.disabled[a].unwrap_or(f64::NAN) / n;
                    for b in 0..3 {
                        cross[a][b] += r.cross.mae[a][b].unwrap_or(f64::NAN) / n;
                    }
                }
            }
            let overall: Vec<Summary> = runs.iter().map(|r| r.overall).collect();
            StrategyResult {
                strategy,
                mae_mol_by_solvent: by,
                overall: Summary::mean(&overall),
                cross_mae: cross,
                cross_disabled: disabled,
                per_seed_cross: runs.iter().map(|r| r.cross.clone()).collect(),
            }
        })
        .collect();
    Ok(SolventReport {
        schema: SOLVENT_SCHEMA.to_string(),
        version: REPORT_VERSION,
        config: cfg.clone(),
        strategies,
    })
}

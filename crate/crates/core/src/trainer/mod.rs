//! Semi-supervised training over an atom-assigned stream and a multiset
//! stream, evaluation under atom-wise and matched pairing, a synthetic
//! benchmark generator and the experiments run on it.

mod config;
mod data;
mod eval;
pub mod experiments;
mod optim;
pub mod synth;
mod train;

pub use config::{TrainConfig, TrainConfigError};
pub use data::{all_targets, samples_from_entries, DataError, Sample};
pub use eval::{
    cross_solvent_eval, evaluate, metrics, predict_all, CrossSolventReport, EvalReport, Metrics,
    NucleusReport, EVAL_SCHEMA, EVAL_VERSION, SOLVENT_CLASSES,
};
pub use optim::{clip_grad_norm, AdamW, Schedule};
pub use train::{curve_csv, loss_and_grad, planned_steps, train, CurvePoint, TrainError, TrainOutput};

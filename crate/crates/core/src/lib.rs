//! Semi-supervised learning of NMR chemical shifts from literature spectra.
//!
//! The crate is organised along the data path:
//!
//! - [`chemgraph`]: SMILES parsing, structure red flags, atom symmetry classes
//! - [`specparse`]: literature NMR strings to structured spectra
//! - [`curate`]: three-stage filtering, target multisets, dataset files
//! - [`setloss`]: atom-level and permutation-invariant set losses
//! - [`shiftnet`]: a small differentiable per-atom shift predictor
//! - [`trainer`]: the semi-supervised loop, evaluation, synthetic benchmarks

pub mod chemgraph;
pub mod curate;
pub mod setloss;
pub mod shiftnet;
pub mod specparse;
pub mod trainer;

//! Costs that exist only to probe the sorting shortcut.
//!
//! Nothing here is a [`LossKind`](super::LossKind), so none of it can be
//! selected for training or through a config file.

use super::PointCost;

/// `sqrt(|s - t|)`: increasing but concave, so sorting is not optimal.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqrtCost;

impl PointCost for SqrtCost {
    fn cost(&self, s: f64, t: f64) -> f64 {
        (s - t).abs().sqrt()
    }

    fn grad(&self, s: f64, t: f64) -> f64 {
        let d = s - t;
        if d == 0.0 {
            0.0
        } else {
            d.signum() * 0.5 / d.abs().sqrt()
        }
    }
}

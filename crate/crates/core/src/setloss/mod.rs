//! Losses between predicted and observed shifts.
//!
//! Atom-level loss pairs predictions with targets by index. The set loss
//! minimizes over all pairings; for costs `f(|s - t|)` with `f` increasing
//! and convex the optimum is the sorted pairing, which [`sorted_loss`]
//! computes in O(N log N). [`hungarian_loss`] and [`brute_force_loss`] solve
//! the assignment problem directly and serve as oracles.
//!
//! All per-molecule losses are sums; [`batch_loss`] applies the per-batch
//! atom-count normalizers.

mod assignment;
mod batch;
pub mod suite;
pub mod testing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::linear_sum_assignment;
pub use batch::{batch_loss, BatchLoss, LabeledItem, WeakItem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("{preds} predictions vs {targets} targets")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("brute force limited to 8 elements, got {0}")]
    TooLarge(usize),
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("atom map index {index} out of range for {len} predictions")]
    BadAtomMap { index: usize, len: usize },
}

/// A per-pair cost `l(s, t)` and its derivative in `s`.
pub trait PointCost {
    fn cost(&self, s: f64, t: f64) -> f64;
    fn grad(&self, s: f64, t: f64) -> f64;
}

/// The trainable losses. Each is `f(|s - t|)` with `f` increasing and
/// convex, so the sorted pairing is an optimal matching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mae,
    #[default]
    Mse,
    Huber { delta: f64 },
}

impl PointCost for LossKind {
    fn cost(&self, s: f64, t: f64) -> f64 {
        pointwise(*self, s, t)
    }

    fn grad(&self, s: f64, t: f64) -> f64 {
        let d = s - t;
        match *self {
            LossKind::Mae => {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Mse => 2.0 * d,
            LossKind::Huber { delta } => d.clamp(-delta, delta),
        }
    }
}

pub fn pointwise(kind: LossKind, s: f64, t: f64) -> f64 {
    let d = (s - t).abs();
    match kind {
        LossKind::Mae => d,
        LossKind::Mse => d * d,
        LossKind::Huber { delta } => {
            if d <= delta {
                0.5 * d * d
            } else {
                delta * (d - 0.5 * delta)
            }
        }
    }
}

/// Loss, optimal pairing and gradient for one molecule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub loss: f64,
    /// `assignment[i]` is the target index paired with prediction `i`.
    pub assignment: Vec<usize>,
    /// d loss / d preds[i] with the pairing held fixed.
    pub grad: Vec<f64>,
}

fn check_lengths(preds: &[f64], targets: &[f64]) -> Result<(), LossError> {
    if preds.len() == targets.len() {
        Ok(())
    } else {
        Err(LossError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        })
    }
}

fn evaluate<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
    assignment: Vec<usize>,
) -> MatchResult {
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(preds.len());
    for (i, &j) in assignment.iter().enumerate() {
        loss += cost.cost(preds[i], targets[j]);
        grad.push(cost.grad(preds[i], targets[j]));
    }
    MatchResult {
        loss,
        assignment,
        grad,
    }
}

/// Sum of costs with prediction `i` paired to target `i`.
pub fn atom_loss<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
) -> Result<f64, LossError> {
    check_lengths(preds, targets)?;
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(&s, &t)| cost.cost(s, t))
        .sum())
}

/// Like [`atom_loss`], with the identity pairing and its gradient.
pub fn identity_match<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
) -> Result<MatchResult, LossError> {
    check_lengths(preds, targets)?;
    Ok(evaluate(cost, preds, targets, (0..preds.len()).collect()))
}

/// Loss under an explicit pairing `assignment[i] = target index`.
pub fn loss_under<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
    assignment: &[usize],
) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.cost(preds[i], targets[j]))
        .sum()
}

/// Minimum over all pairings, solved as a linear assignment problem.
pub fn hungarian_loss<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
) -> Result<MatchResult, LossError> {
    check_lengths(preds, targets)?;
    let n = preds.len();
    let mut matrix = Vec::with_capacity(n * n);
    for &s in preds {
        matrix.extend(targets.iter().map(|&t| cost.cost(s, t)));
    }
    let assignment = linear_sum_assignment(&matrix, n);
    Ok(evaluate(cost, preds, targets, assignment))
}

/// Indices ordering `values` ascending; ties keep index order.
pub fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Pairs the k-th smallest prediction with the k-th smallest target.
/// Optimal for every [`LossKind`]; not for concave costs.
pub fn sorted_loss<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
) -> Result<MatchResult, LossError> {
    check_lengths(preds, targets)?;
    let p = argsort(preds);
    let t = argsort(targets);
    let mut assignment = vec![0; preds.len()];
    for (&i, &j) in p.iter().zip(&t) {
        assignment[i] = j;
    }
    Ok(evaluate(cost, preds, targets, assignment))
}

/// Exact minimum by enumerating all N! pairings (Heap's algorithm).
pub fn brute_force_loss<C: PointCost + ?Sized>(
    cost: &C,
    preds: &[f64],
    targets: &[f64],
) -> Result<f64, LossError> {
    check_lengths(preds, targets)?;
    let n = preds.len();
    if n > 8 {
        return Err(LossError::TooLarge(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = loss_under(cost, preds, targets, &perm);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(loss_under(cost, preds, targets, &perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}

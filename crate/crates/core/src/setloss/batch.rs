use super::{identity_match, sorted_loss, LossError, LossKind};

/// One labeled molecule: target `k` is paired with `preds[atom_map[k]]`.
#[derive(Debug, Clone, Copy)]
pub struct LabeledItem<'a> {
    pub preds: &'a [f64],
    pub targets: &'a [f64],
    pub atom_map: &'a [usize],
}

/// One weakly labeled molecule: an unordered target multiset.
#[derive(Debug, Clone, Copy)]
pub struct WeakItem<'a> {
    pub preds: &'a [f64],
    pub targets: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    /// Atom-level loss divided by the labeled atom count.
    pub supervised: f64,
    /// Set loss divided by the weak atom count, before the lambda factor.
    pub weak: f64,
    pub n_labeled_atoms: usize,
    pub n_weak_atoms: usize,
    /// A stream contributed no atoms; its normalizer was taken as 1.
    pub empty_labeled: bool,
    pub empty_weak: bool,
    /// d total / d preds, one vector per labeled item.
    pub grad_labeled: Vec<Vec<f64>>,
    /// d total / d preds, one vector per weak item (lambda included).
    pub grad_weak: Vec<Vec<f64>>,
}

/// `total = sum(atom) / N1 + lambda * sum(set) / N2`.
///
/// Items are summed in order, so the result does not depend on how the
/// caller computed the predictions.
pub fn batch_loss(
    kind: LossKind,
    labeled: &[LabeledItem<'_>],
    weak: &[WeakItem<'_>],
    lambda: f64,
) -> Result<BatchLoss, LossError> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(LossError::NegativeLambda(lambda));
    }

    let n1: usize = labeled.iter().map(|m| m.targets.len()).sum();
    let n2: usize = weak.iter().map(|m| m.targets.len()).sum();
    let norm1 = n1.max(1) as f64;
    let norm2 = n2.max(1) as f64;

    let mut sup_sum = 0.0;
    let mut grad_labeled = Vec::with_capacity(labeled.len());
    for item in labeled {
        if item.atom_map.len() != item.targets.len() {
            return Err(LossError::LengthMismatch {
                preds: item.atom_map.len(),
                targets: item.targets.len(),
            });
        }
        let mut gathered = Vec::with_capacity(item.atom_map.len());
        for &i in item.atom_map {
            let &p = item.preds.get(i).ok_or(LossError::BadAtomMap {
                index: i,
                len: item.preds.len(),
            })?;
            gathered.push(p);
        }
        let r = identity_match(&kind, &gathered, item.targets)?;
        sup_sum += r.loss;
        let mut g = vec![0.0; item.preds.len()];
        for (k, &i) in item.atom_map.iter().enumerate() {
            g[i] += r.grad[k] / norm1;
        }
        grad_labeled.push(g);
    }

    let mut weak_sum = 0.0;
    let mut grad_weak = Vec::with_capacity(weak.len());
    for item in weak {
        let r = sorted_loss(&kind, item.preds, item.targets)?;
        weak_sum += r.loss;
        grad_weak.push(r.grad.iter().map(|g| lambda * g / norm2).collect());
    }

    let supervised = sup_sum / norm1;
    let weak_part = weak_sum / norm2;
    Ok(BatchLoss {
        total: supervised + lambda * weak_part,
        supervised,
        weak: weak_part,
        n_labeled_atoms: n1,
        n_weak_atoms: n2,
        empty_labeled: n1 == 0,
        empty_weak: n2 == 0,
        grad_labeled,
        grad_weak,
    })
}

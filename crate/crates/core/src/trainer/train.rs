use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::data::Sample;
use super::optim::{clip_grad_norm, AdamW, Schedule};
use super::TrainConfig;
use crate::setloss::{batch_loss, BatchLoss, LabeledItem, LossError, LossKind, WeakItem};
use crate::shiftnet::{ModelError, MolInput, ToyModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("both the labeled and the weak stream are empty")]
    EmptyBothStreams,
    #[error("labeled sample {0} has no atom assignment")]
    Unassigned(usize),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("loss: {0}")]
    Loss(#[from] LossError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub lr: f64,
    pub total: f64,
    pub supervised: f64,
    pub weak: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ToyModel,
    pub curve: Vec<CurvePoint>,
}

/// Loss curve as CSV with columns `step,total,supervised,weak`.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("step,total,supervised,weak\n");
    for p in curve {
        s.push_str(&format!("{},{},{},{}\n", p.step, p.total, p.supervised, p.weak));
    }
    s
}

/// Endless reshuffled passes over `0..n`, each pass in a fresh order.
struct Stream {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(n: usize, seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Stream { order, pos: 0, rng }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k && !self.order.is_empty() {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Batch loss at the current parameters and its gradient with respect to
/// every parameter.
pub fn loss_and_grad(
    model: &ToyModel,
    kind: LossKind,
    labeled: &[&Sample],
    weak: &[&Sample],
    lambda: f64,
) -> Result<(BatchLoss, Vec<f64>), TrainError> {
    let inputs: Vec<MolInput> = labeled
        .iter()
        .chain(weak)
        .map(|s| MolInput {
            rows: s.rows.view(),
            solvent: s.solvent,
        })
        .collect();
    let (preds, tape) = model.forward(&inputs)?;
    let (pl, pw) = preds.split_at(labeled.len());
    let mut li = Vec::with_capacity(labeled.len());
    for (k, (s, p)) in labeled.iter().zip(pl).enumerate() {
        li.push(LabeledItem {
            preds: p,
            targets: &s.targets,
            atom_map: s.atom_rows.as_deref().ok_or(TrainError::Unassigned(k))?,
        });
    }
    let wi: Vec<WeakItem> = weak
        .iter()
        .zip(pw)
        .map(|(s, p)| WeakItem {
            preds: p,
            targets: &s.targets,
        })
        .collect();
    let b = batch_loss(kind, &li, &wi, lambda)?;
    let upstream: Vec<Vec<f64>> = b
        .grad_labeled
        .iter()
        .chain(&b.grad_weak)
        .cloned()
        .collect();
    let grad = model.backward(&tape, &upstream)?;
    Ok((b, grad))
}

/// Number of optimiser steps `train` will take.
pub fn planned_steps(cfg: &TrainConfig, n_labeled: usize, n_weak: usize) -> usize {
    if let Some(t) = cfg.total_steps {
        return t;
    }
    let weak_active = n_weak > 0 && cfg.lambda > 0.0;
    let per_epoch = if weak_active {
        n_weak.div_ceil(cfg.batch_weak)
    } else {
        n_labeled.div_ceil(cfg.batch_labeled)
    };
    cfg.epochs * per_epoch
}

/// Minimises `L_atom + lambda * L_set` over the two streams. The weak
/// stream is skipped when it is empty or `lambda` is zero. An epoch is one
/// pass over the weak stream when it is active, else over the labeled one.
pub fn train(
    cfg: &TrainConfig,
    labeled: &[Sample],
    weak: &[Sample],
    mut model: ToyModel,
) -> Result<TrainOutput, TrainError> {
    let weak_active = !weak.is_empty() && cfg.lambda > 0.0;
    if labeled.is_empty() && !weak_active {
        return Err(TrainError::EmptyBothStreams);
    }
    if let Some(k) = labeled.iter().position(|s| !s.is_labeled()) {
        return Err(TrainError::Unassigned(k));
    }
    let steps = planned_steps(cfg, labeled.len(), weak.len());
    let schedule = Schedule::new(cfg.peak_lr, cfg.warmup_ratio, steps);
    let mut opt = AdamW::new(
        model.num_params(),
        cfg.adam_betas,
        cfg.adam_eps,
        cfg.weight_decay,
    );
    let mut s1 = Stream::new(labeled.len(), cfg.seed, 1);
    let mut s2 = Stream::new(if weak_active { weak.len() } else { 0 }, cfg.seed, 2);
    let mut curve = Vec::with_capacity(steps);
    for step in 0..steps {
        let lb: Vec<&Sample> = s1.take(cfg.batch_labeled).into_iter().map(|i| &labeled[i]).collect();
        let wb: Vec<&Sample> = s2.take(cfg.batch_weak).into_iter().map(|i| &weak[i]).collect();
        let (b, mut grad) = loss_and_grad(&model, cfg.loss_kind, &lb, &wb, cfg.lambda)?;
        let grad_norm = clip_grad_norm(&mut grad, cfg.grad_clip_norm);
        let lr = schedule.lr(step);
        opt.step(&mut model.params, &grad, lr);
        curve.push(CurvePoint {
            step,
            lr,
            total: b.total,
            supervised: b.supervised,
            weak: b.weak,
            grad_norm,
        });
    }
    Ok(TrainOutput { model, curve })
}

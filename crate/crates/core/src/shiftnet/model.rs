use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specparse::{Nucleus, SolventClass};

use super::features::D;

/// Where the solvent embedding enters the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Added to a mean-pooled molecule context that is concatenated to
    /// every atom's head input.
    GlobalContext,
    /// Added to each atom embedding before the backbone.
    PreBackbone,
    /// Added to each atom representation after the backbone.
    PostBackbone,
    /// A per-solvent scalar added to every predicted shift.
    ScalarCorrection,
    #[default]
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::GlobalContext,
        Strategy::PreBackbone,
        Strategy::PostBackbone,
        Strategy::ScalarCorrection,
        Strategy::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::GlobalContext => "global_context",
            Strategy::PreBackbone => "pre_backbone",
            Strategy::PostBackbone => "post_backbone",
            Strategy::ScalarCorrection => "scalar_correction",
            Strategy::None => "none",
        }
    }

    fn has_embedding(self) -> bool {
        matches!(
            self,
            Strategy::GlobalContext | Strategy::PreBackbone | Strategy::PostBackbone
        )
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// Number of solvent classes seen by the model (CDCl3, DMSO-d6, Other).
pub const SOLVENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub strategy: Strategy,
    /// Linear path from the input features straight to the output.
    pub skip: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: D,
            hidden: 128,
            strategy: Strategy::None,
            skip: true,
        }
    }
}

/// Fixed affine map from network output to ppm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            mean: 0.0,
            scale: 1.0,
        }
    }
}

impl Normalization {
    /// Mean and standard deviation of `values` (scale 1 when degenerate).
    pub fn fit(values: &[f64]) -> Normalization {
        if values.is_empty() {
            return Normalization::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 1e-12 { var.sqrt() } else { 1.0 };
        Normalization { mean, scale }
    }
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub w3: Range<usize>,
    pub b3: usize,
    pub skip: Range<usize>,
    pub embedding: Range<usize>,
    pub solvent_bias: Range<usize>,
    pub len: usize,
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Layout {
        let (d, h) = (c.input_dim, c.hidden);
        let mut at = 0;
        let mut take = |n: usize| {
            at += n;
            at - n..at
        };
        let w1 = take(h * d);
        let b1 = take(h);
        let w2 = take(h * h);
        let b2 = take(h);
        let head = if c.strategy == Strategy::GlobalContext {
            2 * h
        } else {
            h
        };
        let w3 = take(head);
        let b3 = take(1).start;
        let skip = take(if c.skip { d } else { 0 });
        let embedding = take(if c.strategy.has_embedding() {
            SOLVENTS * h
        } else {
            0
        });
        let solvent_bias = take(if c.strategy == Strategy::ScalarCorrection {
            SOLVENTS
        } else {
            0
        });
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            skip,
            embedding,
            solvent_bias,
            len: at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("feature rows have {got} columns, model expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("upstream gradient for molecule {index} has {got} entries, expected {want}")]
    GradientShape {
        index: usize,
        got: usize,
        want: usize,
    },
}

/// Feature rows of one molecule with its solvent tag.
#[derive(Debug, Clone, Copy)]
pub struct MolInput<'a> {
    pub rows: ArrayView2<'a, f64>,
    pub solvent: SolventClass,
}

/// Intermediate values of a forward pass, needed by [`ToyModel::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    x: Array2<f64>,
    /// GELU derivatives at the first and second pre-activations.
    d1: Array2<f64>,
    h1: Array2<f64>,
    d2: Array2<f64>,
    u: Array2<f64>,
    /// Pooled context per molecule (global context only).
    context: Array2<f64>,
    segments: Vec<Range<usize>>,
    solvents: Vec<usize>,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// GELU and its derivative elementwise, sharing one `erf` per element.
fn gelu_layer(z: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut h = Array2::zeros(z.raw_dim());
    let mut d = Array2::zeros(z.raw_dim());
    ndarray::Zip::from(&mut h)
        .and(&mut d)
        .and(z)
        .for_each(|h, d, &x| {
            let cdf = 0.5 * (1.0 + libm::erf(x / SQRT_2));
            *h = x * cdf;
            *d = cdf + x * INV_SQRT_2PI * (-0.5 * x * x).exp();
        });
    (h, d)
}

/// Two GELU hidden layers and a linear head, with optional solvent
/// conditioning. All parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub config: ModelConfig,
    pub nucleus: Nucleus,
    pub norm: Normalization,
    pub params: Vec<f64>,
    layout: Layout,
}

impl ToyModel {
    /// Weights uniform in `±1/sqrt(fan_in)`; biases, skip weights and
    /// solvent parameters start at zero.
    pub fn new(config: ModelConfig, nucleus: Nucleus, norm: Normalization, seed: u64) -> Self {
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h) = (config.input_dim, config.hidden);
        for (range, fan_in) in [
            (layout.w1.clone(), d),
            (layout.w2.clone(), h),
            (layout.w3.clone(), layout.w3.len()),
        ] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        }
        ToyModel {
            config,
            nucleus,
            norm,
            params,
            layout,
        }
    }

    pub fn from_parts(
        config: ModelConfig,
        nucleus: Nucleus,
        norm: Normalization,
        params: Vec<f64>,
    ) -> Result<Self, CheckpointError> {
        let layout = Layout::new(&config);
        if params.len() != layout.len {
            return Err(CheckpointError::ParamCount {
                got: params.len(),
                want: layout.len,
            });
        }
        Ok(ToyModel {
            config,
            nucleus,
            norm,
            params,
            layout,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.len
    }

    fn mat(&self, r: &Range<usize>, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[r.clone()]).expect("layout")
    }

    fn vec(&self, r: &Range<usize>) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[r.clone()])
    }

    fn embedding(&self, solvent: usize) -> ArrayView1<'_, f64> {
        let h = self.config.hidden;
        let start = self.layout.embedding.start + solvent * h;
        ArrayView1::from(&self.params[start..start + h])
    }

    /// Shifts in ppm for every row of every molecule.
    pub fn forward(&self, inputs: &[MolInput<'_>]) -> Result<(Vec<Vec<f64>>, Tape), ModelError> {
        let (d, h) = (self.config.input_dim, self.config.hidden);
        let strategy = self.config.strategy;
        let mut segments = Vec::with_capacity(inputs.len());
        let mut at = 0;
        for m in inputs {
            if m.rows.ncols() != d {
                return Err(ModelError::DimensionMismatch {
                    got: m.rows.ncols(),
                    want: d,
                });
            }
            segments.push(at..at + m.rows.nrows());
            at += m.rows.nrows();
        }
        let solvents: Vec<usize> = inputs.iter().map(|m| m.solvent.index()).collect();
        let mut x = Array2::zeros((at, d));
        for (m, seg) in inputs.iter().zip(&segments) {
            x.slice_mut(s![seg.clone(), ..]).assign(&m.rows);
        }

        let w1 = self.mat(&self.layout.w1, h, d);
        let mut z1 = x.dot(&w1.t()) + &self.vec(&self.layout.b1);
        if strategy == Strategy::PreBackbone {
            for (seg, &c) in segments.iter().zip(&solvents) {
                let mut block = z1.slice_mut(s![seg.clone(), ..]);
                block += &self.embedding(c);
            }
        }
        let (h1, d1) = gelu_layer(&z1);
        let w2 = self.mat(&self.layout.w2, h, h);
        let z2 = h1.dot(&w2.t()) + &self.vec(&self.layout.b2);
        let (mut u, d2) = gelu_layer(&z2);
        if strategy == Strategy::PostBackbone {
            for (seg, &c) in segments.iter().zip(&solvents) {
                let mut block = u.slice_mut(s![seg.clone(), ..]);
                block += &self.embedding(c);
            }
        }

        let w3 = self.vec(&self.layout.w3);
        let b3 = self.params[self.layout.b3];
        let mut y: Array1<f64> = u.dot(&w3.slice(s![..h])) + b3;
        let mut context = Array2::zeros((0, h));
        if strategy == Strategy::GlobalContext {
            context = Array2::zeros((inputs.len(), h));
            for (k, (seg, &c)) in segments.iter().zip(&solvents).enumerate() {
                let block = u.slice(s![seg.clone(), ..]);
                let mut m = block.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(h));
                m += &self.embedding(c);
                let extra = m.dot(&w3.slice(s![h..]));
                y.slice_mut(s![seg.clone()]).mapv_inplace(|v| v + extra);
                context.row_mut(k).assign(&m);
            }
        }
        if self.config.skip {
            y += &x.dot(&self.vec(&self.layout.skip));
        }

        let mut out = Vec::with_capacity(inputs.len());
        for (seg, &c) in segments.iter().zip(&solvents) {
            let bias = if strategy == Strategy::ScalarCorrection {
                self.params[self.layout.solvent_bias.start + c]
            } else {
                0.0
            };
            out.push(
                y.slice(s![seg.clone()])
                    .iter()
                    .map(|&v| self.norm.mean + self.norm.scale * v + bias)
                    .collect(),
            );
        }
        let tape = Tape {
            x,
            d1,
            h1,
            d2,
            u,
            context,
            segments,
            solvents,
        };
        Ok((out, tape))
    }

    /// Predicted shifts for one molecule.
    pub fn predict(
        &self,
        rows: ArrayView2<'_, f64>,
        solvent: SolventClass,
    ) -> Result<Vec<f64>, ModelError> {
        let (mut out, _) = self.forward(&[MolInput { rows, solvent }])?;
        Ok(out.pop().unwrap())
    }

    /// Gradient of `sum_r upstream[r] * ppm[r]` with respect to every
    /// parameter, laid out like [`ToyModel::params`].
    pub fn backward(&self, tape: &Tape, upstream: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let (d, h) = (self.config.input_dim, self.config.hidden);
        let strategy = self.config.strategy;
        let l = &self.layout;
        let mut grad = vec![0.0; l.len];
        let n = tape.x.nrows();

        let mut dy = Array1::zeros(n);
        for (k, (seg, g)) in tape.segments.iter().zip(upstream).enumerate() {
            if g.len() != seg.len() {
                return Err(ModelError::GradientShape {
                    index: k,
                    got: g.len(),
                    want: seg.len(),
                });
            }
            for (r, &gr) in seg.clone().zip(g) {
                dy[r] = self.norm.scale * gr;
            }
            if strategy == Strategy::ScalarCorrection {
                grad[l.solvent_bias.start + tape.solvents[k]] += g.iter().sum::<f64>();
            }
        }

        grad[l.b3] = dy.sum();
        if self.config.skip {
            let gs = tape.x.t().dot(&dy);
            grad[l.skip.clone()].copy_from_slice(gs.as_slice().unwrap());
        }
        let w3 = self.vec(&l.w3);
        let gw3_local = tape.u.t().dot(&dy);
        grad[l.w3.start..l.w3.start + h].copy_from_slice(gw3_local.as_slice().unwrap());
        // du[r, :] = dy[r] * w3[..h]
        let w3_local = w3.slice(s![..h]);
        let mut du = dy
            .view()
            .insert_axis(Axis(1))
            .dot(&w3_local.insert_axis(Axis(0)));

        if strategy == Strategy::GlobalContext {
            let w3_ctx = w3.slice(s![h..]);
            let mut gw3_ctx = Array1::<f64>::zeros(h);
            for (k, seg) in tape.segments.iter().enumerate() {
                if seg.is_empty() {
                    continue;
                }
                let dsum: f64 = dy.slice(s![seg.clone()]).sum();
                gw3_ctx.scaled_add(dsum, &tape.context.row(k));
                // d context = dsum * w3_ctx, shared by the embedding and the mean
                let e = l.embedding.start + tape.solvents[k] * h;
                for (j, &w) in w3_ctx.iter().enumerate() {
                    grad[e + j] += dsum * w;
                }
                let per_row = w3_ctx.mapv(|w| dsum * w / seg.len() as f64);
                let mut block = du.slice_mut(s![seg.clone(), ..]);
                block += &per_row;
            }
            grad[l.w3.start + h..l.w3.end].copy_from_slice(gw3_ctx.as_slice().unwrap());
        }
        if strategy == Strategy::PostBackbone {
            for (seg, &c) in tape.segments.iter().zip(&tape.solvents) {
                let s = du.slice(s![seg.clone(), ..]).sum_axis(Axis(0));
                let e = l.embedding.start + c * h;
                for (j, v) in s.iter().enumerate() {
                    grad[e + j] += v;
                }
            }
        }

        let dz2 = du * &tape.d2;
        let gw2 = dz2.t().dot(&tape.h1);
        grad[l.w2.clone()].copy_from_slice(gw2.as_standard_layout().as_slice().unwrap());
        let gb2 = dz2.sum_axis(Axis(0));
        grad[l.b2.clone()].copy_from_slice(gb2.as_slice().unwrap());

        let w2 = self.mat(&l.w2, h, h);
        let dz1 = dz2.dot(&w2) * &tape.d1;
        let gw1 = dz1.t().dot(&tape.x);
        debug_assert_eq!(gw1.dim(), (h, d));
        grad[l.w1.clone()].copy_from_slice(gw1.as_standard_layout().as_slice().unwrap());
        let gb1 = dz1.sum_axis(Axis(0));
        grad[l.b1.clone()].copy_from_slice(gb1.as_slice().unwrap());
        if strategy == Strategy::PreBackbone {
            for (seg, &c) in tape.segments.iter().zip(&tape.solvents) {
                let s = dz1.slice(s![seg.clone(), ..]).sum_axis(Axis(0));
                let e = l.embedding.start + c * h;
                for (j, v) in s.iter().enumerate() {
                    grad[e + j] += v;
                }
            }
        }
        Ok(grad)
    }

    /// The scalar added to every shift of `solvent` (scalar correction only).
    pub fn solvent_bias_mut(&mut self, solvent: SolventClass) -> Option<&mut f64> {
        let r = self.layout.solvent_bias.clone();
        self.params[r].get_mut(solvent.index())
    }

    /// The same weights with every solvent's embedding and bias replaced
    /// by their mean over the solvent classes, so the tag carries no
    /// information.
    pub fn solvent_averaged(&self) -> ToyModel {
        let mut m = self.clone();
        let h = self.config.hidden;
        let e = self.layout.embedding.start;
        if !self.layout.embedding.is_empty() {
            for j in 0..h {
                let mean = (0..SOLVENTS).map(|c| self.params[e + c * h + j]).sum::<f64>() / SOLVENTS as f64;
                for c in 0..SOLVENTS {
                    m.params[e + c * h + j] = mean;
                }
            }
        }
        let b = self.layout.solvent_bias.clone();
        if !b.is_empty() {
            let mean = self.params[b.clone()].iter().sum::<f64>() / b.len() as f64;
            m.params[b].iter_mut().for_each(|p| *p = mean);
        }
        m
    }

    /// The same weights with solvent conditioning switched off.
    pub fn without_conditioning(&self) -> ToyModel {
        let mut m = self.clone();
        for r in [self.layout.embedding.clone(), self.layout.solvent_bias.clone()] {
            m.params[r].iter_mut().for_each(|p| *p = 0.0);
        }
        m
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            version: CHECKPOINT_VERSION,
            config: self.config,
            nucleus: self.nucleus,
            norm: self.norm,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self, CheckpointError> {
        if c.schema != CHECKPOINT_SCHEMA || c.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Schema(format!("{} v{}", c.schema, c.version)));
        }
        ToyModel::from_parts(c.config, c.nucleus, c.norm, c.params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        ToyModel::from_checkpoint(c)
    }
}

pub const CHECKPOINT_SCHEMA: &str = "shiftlit.model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: dimensions, strategy, normalization and the flat
/// parameter vector in [`Layout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub version: u32,
    pub config: ModelConfig,
    pub nucleus: Nucleus,
    pub norm: Normalization,
    pub params: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("invalid checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint {0}")]
    Schema(String),
    #[error("checkpoint has {got} parameters, layout needs {want}")]
    ParamCount { got: usize, want: usize },
}

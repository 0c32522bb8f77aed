/// Adaptive-moment optimiser with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamW {
    pub fn new(n: usize, betas: (f64, f64), eps: f64, weight_decay: f64) -> Self {
        AdamW {
            beta1: betas.0,
            beta2: betas.1,
            eps,
            weight_decay,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// `p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] *= 1.0 - lr * self.weight_decay;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Linear warmup over `ceil(warmup_ratio * total)` steps, then linear decay
/// towards zero at `total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl Schedule {
    pub fn new(peak: f64, warmup_ratio: f64, total: usize) -> Self {
        let warmup = (warmup_ratio * total as f64).ceil() as usize;
        Schedule {
            peak,
            warmup: warmup.min(total),
            total,
        }
    }

    /// Learning rate for zero-based step `t`.
    pub fn lr(&self, t: usize) -> f64 {
        if t < self.warmup {
            self.peak * (t + 1) as f64 / self.warmup as f64
        } else if self.total > self.warmup {
            self.peak * self.total.saturating_sub(t) as f64 / (self.total - self.warmup) as f64
        } else {
            self.peak
        }
    }
}

/// Rescales `grad` to at most `max_norm` in Euclidean norm; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

//! Randomized checks of the set-loss machinery, shared by the `losscheck`
//! command and the test suites.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::testing::SqrtCost;
use super::{
    atom_loss, brute_force_loss, hungarian_loss, loss_under, pointwise, sorted_loss, LossKind,
};

pub const CONVEX_KINDS: [LossKind; 5] = [
    LossKind::Mae,
    LossKind::Mse,
    LossKind::Huber { delta: 0.1 },
    LossKind::Huber { delta: 1.0 },
    LossKind::Huber { delta: 10.0 },
];

pub const REL_TOL: f64 = 1e-9;
pub const GRAD_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    /// Random instances for the equivalence check.
    pub iters: usize,
    /// Set sizes are drawn uniformly from 1..=max_n.
    pub max_n: usize,
    /// Values are drawn uniformly from [-value_range, value_range].
    pub value_range: f64,
    pub quadruples: usize,
    pub grad_instances: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            iters: 10_000,
            max_n: 50,
            value_range: 300.0,
            quadruples: 100_000,
            grad_instances: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema: &'static str,
    pub version: u32,
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: String,
    instances: usize,
    failures: usize,
    max_error: f64,
    tolerance: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &str, tolerance: f64) -> Self {
        Tally {
            name: name.to_string(),
            instances: 0,
            failures: 0,
            max_error: 0.0,
            tolerance,
            first_failure: None,
        }
    }

    /// Records one comparison; `err` is already scaled to the tolerance's units.
    fn record(&mut self, err: f64, describe: impl FnOnce() -> String) {
        self.instances += 1;
        if err.is_nan() || err > self.max_error {
            self.max_error = err;
        }
        if err.is_nan() || err > self.tolerance {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            passed: self.failures == 0,
            name: self.name,
            instances: self.instances,
            failures: self.failures,
            max_error: self.max_error,
            tolerance: self.tolerance,
            first_failure: self.first_failure,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn values(rng: &mut ChaCha8Rng, n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-range..=range)).collect()
}

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = vec![
        equivalence(cfg, &mut rng),
        concave_counterexample(),
        exchange_lemma(cfg, &mut rng),
        gradients(cfg, &mut rng),
    ];
    checks.extend(invariances(cfg, &mut rng));
    let passed = checks.iter().all(|c| c.passed);
    SuiteReport {
        schema: "shiftlit.losscheck",
        version: 1,
        config: cfg.clone(),
        checks,
        passed,
    }
}

/// sorted == hungarian for every convex kind, and == brute force for N <= 7.
fn equivalence(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut t = Tally::new("sorted_equals_hungarian", REL_TOL);
    for _ in 0..cfg.iters {
        let n = rng.random_range(1..=cfg.max_n.max(1));
        let p = values(rng, n, cfg.value_range);
        let q = values(rng, n, cfg.value_range);
        for kind in CONVEX_KINDS {
            let h = hungarian_loss(&kind, &p, &q).unwrap().loss;
            let s = sorted_loss(&kind, &p, &q).unwrap().loss;
            let mut err = rel(s, h);
            if n <= 7 {
                let b = brute_force_loss(&kind, &p, &q).unwrap();
                err = err.max(rel(b, h));
            }
            t.record(err, || format!("{kind:?} preds={p:?} targets={q:?}"));
        }
    }
    t.finish()
}

/// The sqrt cost on {0, 1} vs {1, 2}: sorting gives 2, the optimum is sqrt 2.
pub fn concave_counterexample() -> CheckResult {
    let (p, q) = ([0.0, 1.0], [1.0, 2.0]);
    let sorted = sorted_loss(&SqrtCost, &p, &q).unwrap().loss;
    let hung = hungarian_loss(&SqrtCost, &p, &q).unwrap().loss;
    let brute = brute_force_loss(&SqrtCost, &p, &q).unwrap();
    let ok = sorted == 2.0
        && (hung - 2f64.sqrt()).abs() < 1e-12
        && (brute - hung).abs() < 1e-12
        && sorted - hung > 0.58;
    CheckResult {
        name: "concave_counterexample".into(),
        instances: 1,
        failures: usize::from(!ok),
        max_error: 0.0,
        tolerance: 0.58,
        passed: ok,
        first_failure: (!ok).then(|| format!("sorted={sorted} hungarian={hung} brute={brute}")),
    }
}

/// f(|x1-y1|) + f(|x2-y2|) <= f(|x1-y2|) + f(|x2-y1|) for x1<=x2, y1<=y2.
fn exchange_lemma(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut t = Tally::new("exchange_lemma", 1e-12);
    for _ in 0..cfg.quadruples {
        let r = cfg.value_range;
        let mut x = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
        let mut y = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for kind in CONVEX_KINDS {
            let lhs = pointwise(kind, x[0], y[0]) + pointwise(kind, x[1], y[1]);
            let rhs = pointwise(kind, x[0], y[1]) + pointwise(kind, x[1], y[0]);
            worst = worst.max((lhs - rhs) / rhs.abs().max(1.0));
        }
        t.record(worst, || format!("x={x:?} y={y:?}"));
    }
    t.finish()
}

fn tie_free(v: &[f64], gap: f64) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[1] - w[0] > gap)
}

/// Central differences of sorted_loss against the analytic gradient, on
/// instances whose values and matched residuals stay 1e-3 away from ties
/// and kinks. Values are drawn from [-5, 5] so that the loss, and with it
/// the rounding error of a difference quotient with h = 1e-6, stays small.
fn gradients(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut t = Tally::new("sorted_loss_gradient", GRAD_TOL);
    let mut done = 0;
    while done < cfg.grad_instances {
        let n = rng.random_range(2..=12);
        let p = values(rng, n, 5.0);
        let q = values(rng, n, 5.0);
        if !tie_free(&p, 1e-3) || !tie_free(&q, 1e-3) {
            continue;
        }
        let base = sorted_loss(&LossKind::Mae, &p, &q).unwrap();
        let kink = base
            .assignment
            .iter()
            .enumerate()
            .any(|(i, &j)| (p[i] - q[j]).abs() < 1e-3);
        if kink {
            continue;
        }
        done += 1;
        let mut worst = 0.0f64;
        let mut moved_matching = false;
        for kind in CONVEX_KINDS {
            let r = sorted_loss(&kind, &p, &q).unwrap();
            for i in 0..n {
                let mut up = p.clone();
                let mut down = p.clone();
                up[i] += FD_STEP;
                down[i] -= FD_STEP;
                let ru = sorted_loss(&kind, &up, &q).unwrap();
                let rd = sorted_loss(&kind, &down, &q).unwrap();
                let fd = (ru.loss - rd.loss) / (2.0 * FD_STEP);
                worst = worst.max((fd - r.grad[i]).abs());
                // a step of h never reorders values that are 1e-3 apart
                moved_matching |= ru.assignment != r.assignment || rd.assignment != r.assignment;
            }
        }
        if moved_matching {
            worst = f64::INFINITY;
        }
        t.record(worst, || format!("preds={p:?} targets={q:?}"));
    }
    t.finish()
}

/// Permutation invariance, the lower bound against random pairings, and
/// atom loss >= set loss.
fn invariances(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut perm_t = Tally::new("permutation_invariance", REL_TOL);
    let mut bound_t = Tally::new("hungarian_lower_bound", REL_TOL);
    let mut atom_t = Tally::new("atom_loss_upper_bound", REL_TOL);
    let instances = (cfg.iters / 10).max(1);
    for _ in 0..instances {
        let n = rng.random_range(1..=cfg.max_n.max(1));
        let p = values(rng, n, cfg.value_range);
        let q = values(rng, n, cfg.value_range);
        let mut pp = p.clone();
        let mut qq = q.clone();
        pp.shuffle(rng);
        qq.shuffle(rng);
        for kind in CONVEX_KINDS {
            let s = sorted_loss(&kind, &p, &q).unwrap().loss;
            let h = hungarian_loss(&kind, &p, &q).unwrap().loss;
            let s2 = sorted_loss(&kind, &pp, &qq).unwrap().loss;
            let h2 = hungarian_loss(&kind, &pp, &qq).unwrap().loss;
            perm_t.record(rel(s, s2).max(rel(h, h2)), || format!("{kind:?} n={n}"));

            let mut worst = 0.0f64;
            let mut sigma: Vec<usize> = (0..n).collect();
            for _ in 0..100 {
                sigma.shuffle(rng);
                let other = loss_under(&kind, &p, &q, &sigma);
                worst = worst.max((h - other) / other.abs().max(1.0));
            }
            bound_t.record(worst, || format!("{kind:?} n={n}"));

            let a = atom_loss(&kind, &p, &q).unwrap();
            atom_t.record((s - a) / a.abs().max(1.0), || format!("{kind:?} n={n}"));
        }
    }
    vec![perm_t.finish(), bound_t.finish(), atom_t.finish()]
}

//! Acceptance criteria, run in order on one thread. Each prints a single
//! PASS/FAIL line with the tolerance it was judged against; the process
//! fails if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use shiftlit::chemgraph::parse_smiles;
use shiftlit::curate::{check_consistency, check_nmr_validity, check_structure, ValidityConfig};
use shiftlit::setloss::suite::{run_suite, SuiteConfig, SuiteReport};
use shiftlit::setloss::LossKind;
use shiftlit::shiftnet::{Normalization, Strategy, ToyModel};
use shiftlit::specparse::{
    outcome_json, parse_spectrum, solvent_key, Nucleus, Peak, SolventClass, Spectrum,
    CDCL3_ALIASES, DMSO_ALIASES,
};
use shiftlit::trainer::experiments::{
    run_ablation, run_lambda_sweep, run_solvent_experiment, AblationReport, ExperimentConfig,
    Regime, SolventReport, SweepReport, SWEEP_LAMBDAS,
};
use shiftlit::trainer::synth::{synth_generate, SynthConfig};
use shiftlit::trainer::{loss_and_grad, samples_from_entries, Sample, TrainConfig};

// Criterion 1
const EQUIV_INSTANCES: usize = 10_000;
/// MAE, MSE and Huber at three deltas.
const EQUIV_KINDS: usize = 5;
const EQUIV_MAX_N: usize = 50;
const EQUIV_RANGE: f64 = 300.0;
const EQUIV_REL_TOL: f64 = 1e-9;
const EQUIV_TIME_LIMIT: Duration = Duration::from_secs(30);
// Criterion 2
const CONCAVE_SORTED: f64 = 2.0;
const CONCAVE_MIN_GAP: f64 = 0.58;
// Criterion 3
const LEMMA_QUADRUPLES: usize = 100_000;
// Criterion 4
const LOSS_GRAD_TOL: f64 = 1e-5;
const MODEL_GRAD_REL_TOL: f64 = 1e-4;
const MODEL_GRAD_INSTANCES: usize = 100;
const MODEL_GRAD_STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms.
const MODEL_GRAD_FLOOR: f64 = 1e-3;
/// Distinct predictions within a weak molecule stay this far apart.
const TIE_GAP: f64 = 1e-3;
// Criterion 5: valid windows in ppm, inclusive
const RANGE_TABLE: [(Nucleus, f64, f64); 6] = [
    (Nucleus::H1, -1.0, 15.0),
    (Nucleus::C13, -10.0, 230.0),
    (Nucleus::F19, -300.0, 300.0),
    (Nucleus::P31, -150.0, 200.0),
    (Nucleus::B11, -50.0, 100.0),
    (Nucleus::Si29, -70.0, 40.0),
];
const RANGE_STEP_OUT: f64 = 0.01;
// Criterion 6
const CORPUS_MIN_LINES: usize = 200;
// Criterion 7
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const COMBINED_GAIN: f64 = 0.15;
const COLLAPSE_MOL_RATIO: f64 = 2.0;
const ABLATION_TIME_LIMIT: Duration = Duration::from_secs(600);
// Criterion 9
const SOLVENT_GAIN: f64 = 0.20;

struct Outcome {
    passed: bool,
    line: String,
}

fn report(id: u32, passed: bool, line: String) -> Outcome {
    println!("criterion {id:>2} [{}] {line}", if passed { "PASS" } else { "FAIL" });
    Outcome { passed, line }
}

fn suite() -> (SuiteReport, Duration) {
    let cfg = SuiteConfig {
        iters: EQUIV_INSTANCES,
        max_n: EQUIV_MAX_N,
        value_range: EQUIV_RANGE,
        quadruples: LEMMA_QUADRUPLES,
        grad_instances: MODEL_GRAD_INSTANCES,
        seed: 2024,
    };
    let t = Instant::now();
    let r = run_suite(&cfg);
    (r, t.elapsed())
}

fn criterion_1(r: &SuiteReport, elapsed: Duration) -> Outcome {
    let c = r.check("sorted_equals_hungarian").expect("check present");
    let ok = c.passed && c.tolerance <= EQUIV_REL_TOL && c.instances == EQUIV_INSTANCES * EQUIV_KINDS && elapsed < EQUIV_TIME_LIMIT;
    report(
        1,
        ok,
        format!(
            "sorted == hungarian == brute force (N <= 7): {EQUIV_INSTANCES} instances x {EQUIV_KINDS} convex kinds = {} checks, N in [1, {EQUIV_MAX_N}], values in ±{EQUIV_RANGE}; max rel err {:.2e} (tol {EQUIV_REL_TOL:e}); whole loss suite {:.1} s (limit {} s)",
            c.instances,
            c.max_error,
            elapsed.as_secs_f64(),
            EQUIV_TIME_LIMIT.as_secs()
        ),
    )
}

fn criterion_2(r: &SuiteReport) -> Outcome {
    use shiftlit::setloss::testing::SqrtCost;
    use shiftlit::setloss::{hungarian_loss, sorted_loss};
    let c = r.check("concave_counterexample").expect("check present");
    let s = sorted_loss(&SqrtCost, &[0.0, 1.0], &[1.0, 2.0]).unwrap().loss;
    let h = hungarian_loss(&SqrtCost, &[0.0, 1.0], &[1.0, 2.0]).unwrap().loss;
    let ok = c.passed && s == CONCAVE_SORTED && (h - 2f64.sqrt()).abs() < 1e-12 && s - h > CONCAVE_MIN_GAP;
    report(
        2,
        ok,
        format!("sqrt cost on {{0,1}} vs {{1,2}}: sorted {s}, hungarian {h:.6}, gap {:.4} (need > {CONCAVE_MIN_GAP})", s - h),
    )
}

fn criterion_3(r: &SuiteReport) -> Outcome {
    let c = r.check("exchange_lemma").expect("check present");
    let ok = c.passed && c.failures == 0 && c.instances >= LEMMA_QUADRUPLES;
    report(
        3,
        ok,
        format!(
            "exchange inequality over {} quadruple x kind checks: {} violations (tol {:e})",
            c.instances, c.failures, c.tolerance
        ),
    )
}

/// True when predictions that are not bitwise equal differ by at least `gap`.
fn tie_free(preds: &[f64], gap: f64) -> bool {
    let mut v = preds.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] == w[1] || w[1] - w[0] >= gap)
}

fn full_model_gradients() -> (usize, f64, usize) {
    let data = synth_generate(&SynthConfig {
        n_labeled: 60,
        n_weak: 120,
        n_test: 0,
        n_paired: 0,
        seed: 77,
        ..SynthConfig::default()
    });
    let labeled = samples_from_entries(&data.labeled, Nucleus::H1, true).unwrap();
    let weak = samples_from_entries(&data.weak, Nucleus::H1, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let kinds = [LossKind::Mse, LossKind::Huber { delta: 1.0 }];
    let (mut done, mut worst, mut failures) = (0, 0.0f64, 0);
    while done < MODEL_GRAD_INSTANCES {
        let strategy = Strategy::ALL[done % Strategy::ALL.len()];
        let cfg = TrainConfig {
            hidden: 8,
            strategy,
            ..TrainConfig::default()
        };
        let mut model = ToyModel::new(
            cfg.model_config(),
            Nucleus::H1,
            Normalization { mean: 3.0, scale: 2.0 },
            rng.random(),
        );
        for p in &mut model.params {
            *p += rng.random_range(-0.3..0.3);
        }
        let lb: Vec<&Sample> = vec![&labeled[rng.random_range(0..labeled.len())]];
        let wb: Vec<&Sample> = (0..2).map(|_| &weak[rng.random_range(0..weak.len())]).collect();
        let kind = kinds[done % kinds.len()];
        let lambda = rng.random_range(0.5..20.0);
        let tie = wb.iter().any(|s| {
            let p = model.predict(s.rows.view(), s.solvent).unwrap();
            !tie_free(&p, TIE_GAP)
        });
        if tie {
            continue;
        }
        done += 1;
        let (_, g) = loss_and_grad(&model, kind, &lb, &wb, lambda).unwrap();
        let mut bad = false;
        for i in 0..model.params.len() {
            let mut plus = model.clone();
            plus.params[i] += MODEL_GRAD_STEP;
            let mut minus = model.clone();
            minus.params[i] -= MODEL_GRAD_STEP;
            let fp = loss_and_grad(&plus, kind, &lb, &wb, lambda).unwrap().0.total;
            let fm = loss_and_grad(&minus, kind, &lb, &wb, lambda).unwrap().0.total;
            let fd = (fp - fm) / (2.0 * MODEL_GRAD_STEP);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(MODEL_GRAD_FLOOR);
            worst = worst.max(err);
            bad |= !(err <= MODEL_GRAD_REL_TOL);
        }
        failures += usize::from(bad);
    }
    (done, worst, failures)
}

fn criterion_4(r: &SuiteReport) -> Outcome {
    let c = r.check("sorted_loss_gradient").expect("check present");
    let (n, worst, failures) = full_model_gradients();
    let ok = c.passed && c.tolerance <= LOSS_GRAD_TOL && c.instances == MODEL_GRAD_INSTANCES && failures == 0;
    report(
        4,
        ok,
        format!(
            "sorted_loss grad vs central differences: {} instances, max abs err {:.2e} (tol {LOSS_GRAD_TOL:e}); batch loss through the model, every parameter: {n} micro-batches, max rel err {worst:.2e} (tol {MODEL_GRAD_REL_TOL:e}), {failures} failing",
            c.instances, c.max_error
        ),
    )
}

fn spectrum(nucleus: Nucleus, peaks: Vec<Peak>) -> Spectrum {
    Spectrum {
        nucleus,
        frequency_mhz: None,
        solvent_raw: String::new(),
        solvent_class: SolventClass::Unspecified,
        peaks,
        partial: false,
    }
}

fn criterion_5() -> Outcome {
    let cfg = ValidityConfig::default();
    let mut problems = Vec::new();
    let mut cases = 0;
    for (n, lo, hi) in RANGE_TABLE {
        for (shift, want_pass) in [
            (lo, true),
            (hi, true),
            ((lo + hi) / 2.0, true),
            (lo - RANGE_STEP_OUT, false),
            (hi + RANGE_STEP_OUT, false),
        ] {
            cases += 1;
            let v = check_nmr_validity(&spectrum(n, vec![Peak::point(shift)]), &cfg);
            let rule_ok = want_pass || v.rule.as_deref() == Some("range");
            if v.passed != want_pass || !rule_ok {
                problems.push(format!("{n} at {shift}: {v:?}"));
            }
        }
    }
    let benzene = parse_smiles("c1ccccc1").unwrap();
    let (v, t) = check_consistency(&benzene, &spectrum(Nucleus::C13, vec![Peak::point(128.4)]), &cfg).unwrap();
    let t = t.unwrap_or_else(|| panic!("benzene rejected: {v:?}"));
    if !(v.passed && t.shifts == vec![128.4; 6]) {
        problems.push(format!("benzene target {:?}", t.shifts));
    }
    for (smiles, rule) in [
        ("[13C]O", "has_isotope"),
        ("[CH3]", "is_radical"),
        ("CCBr", "outside_element_whitelist"),
    ] {
        let v = check_structure(&parse_smiles(smiles).unwrap(), &[Nucleus::H1]);
        if v.passed || v.rule.as_deref() != Some(rule) {
            problems.push(format!("{smiles}: {v:?}"));
        }
    }
    report(
        5,
        problems.is_empty(),
        format!(
            "range table over 6 nuclei ({cases} boundary cases, ±{RANGE_STEP_OUT} ppm outside fails), benzene 13C -> 6 x 128.4, isotope/radical/whitelist rejections; {} problems{}",
            problems.len(),
            problems.first().map(|p| format!(": {p}")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().unwrap().strip_suffix(".txt").map(String::from))
        .collect();
    names.sort();
    let comma = Regex::new(r"(\d+),(\d+)").unwrap();
    let (mut total, mut matched) = (0, 0);
    let (mut ranges, mut no_delta, mut decimal_commas) = (0, 0, 0);
    let mut keys = std::collections::BTreeSet::new();
    for name in names {
        let text = fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap();
        let expected = fs::read_to_string(dir.join(format!("{name}.expected.jsonl"))).unwrap();
        for (line, want) in text.lines().zip(expected.lines()) {
            total += 1;
            let got = outcome_json(&parse_spectrum(line));
            let want: serde_json::Value = serde_json::from_str(want).unwrap();
            if got == want {
                matched += 1;
            }
            let Some(peaks) = want.get("peaks").and_then(|p| p.as_array()) else {
                continue;
            };
            keys.insert(solvent_key(want["solvent_raw"].as_str().unwrap_or("")));
            let values: Vec<f64> = peaks
                .iter()
                .flat_map(|p| [p["shift_low"].as_f64().unwrap(), p["shift_high"].as_f64().unwrap()])
                .collect();
            ranges += usize::from(peaks.iter().any(|p| p["shift_low"] != p["shift_high"]));
            no_delta += usize::from(!line.contains('δ'));
            decimal_commas += usize::from(comma.captures_iter(line).any(|c| {
                let v: f64 = format!("{}.{}", &c[1], &c[2]).parse().unwrap();
                values.contains(&v) && !line.contains(&format!("{}.{}", &c[1], &c[2]))
            }));
        }
        assert_eq!(
            text.lines().count(),
            expected.lines().count(),
            "{name}: line counts differ"
        );
    }
    let missing: Vec<&str> = CDCL3_ALIASES
        .iter()
        .chain(DMSO_ALIASES)
        .copied()
        .filter(|a| !keys.contains(*a))
        .collect();
    let ok = total >= CORPUS_MIN_LINES
        && matched == total
        && ranges > 0
        && no_delta > 0
        && decimal_commas > 0
        && missing.is_empty();
    report(
        6,
        ok,
        format!(
            "golden corpus {matched}/{total} lines match (need all, >= {CORPUS_MIN_LINES} lines); {ranges} with range peaks, {no_delta} without δ, {decimal_commas} with decimal commas; solvent aliases missing: {missing:?}"
        ),
    )
}

fn pct_lower(better: f64, worse: f64) -> f64 {
    1.0 - better / worse
}

fn criterion_7(r: &AblationReport, elapsed: Duration) -> Outcome {
    let sup = r.row(Regime::SupervisedOnly).unwrap().mean;
    let weak = r.row(Regime::WeakOnly).unwrap().mean;
    let both = r.row(Regime::SupervisedPlusWeak).unwrap().mean;
    let gain = pct_lower(both.mae_atom, sup.mae_atom);
    let a = gain >= COMBINED_GAIN;
    let mol_ratio = weak.mae_mol / both.mae_mol;
    let b = weak.mae_atom > both.mae_atom && mol_ratio <= COLLAPSE_MOL_RATIO;
    let t = elapsed < ABLATION_TIME_LIMIT;
    report(
        7,
        a && b && t,
        format!(
            "(a) combined mae_atom {:.4} vs supervised-only {:.4}: {:.1}% lower (need >= {:.0}%) [{}]; (b) weak-only mae_atom {:.4} vs combined {:.4} (need worse), mae_mol ratio {mol_ratio:.3} (need <= {COLLAPSE_MOL_RATIO}) [{}]; {} seeds in {:.0} s on one thread (limit {} s)",
            both.mae_atom,
            sup.mae_atom,
            100.0 * gain,
            100.0 * COMBINED_GAIN,
            if a { "ok" } else { "fail" },
            weak.mae_atom,
            both.mae_atom,
            if b { "ok" } else { "fail" },
            r.config.seeds.len(),
            elapsed.as_secs_f64(),
            ABLATION_TIME_LIMIT.as_secs()
        ),
    )
}

fn criterion_8(r: &SweepReport) -> Outcome {
    let at = |l: f64| r.points.iter().find(|p| p.lambda == l).unwrap().mean.mae_atom;
    let (low, mid, high) = (at(0.25), at(16.0), at(256.0));
    let curve: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("{}:{:.4}", p.lambda, p.mean.mae_atom))
        .collect();
    report(
        8,
        mid < low && mid < high,
        format!(
            "mae_atom at lambda 16 {mid:.4} vs 0.25 {low:.4} and 256 {high:.4} (need strictly lower than both); curve {}",
            curve.join(" ")
        ),
    )
}

fn criterion_9(r: &SolventReport) -> Outcome {
    let none = r.strategy(Strategy::None).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for s in [
        Strategy::GlobalContext,
        Strategy::PreBackbone,
        Strategy::PostBackbone,
        Strategy::ScalarCorrection,
    ] {
        let x = r.strategy(s).unwrap();
        // minority classes: DMSO-d6 and Other
        let gains = [1, 2].map(|c| pct_lower(x.mae_mol_by_solvent[c], none.mae_mol_by_solvent[c]));
        let m = &x.cross_mae;
        let tag_ok = (0..3).all(|a| (0..3).filter(|&b| b != a).all(|b| m[a][a] < m[a][b]));
        let this = gains.iter().all(|&g| g >= SOLVENT_GAIN) && tag_ok;
        ok &= this;
        parts.push(format!(
            "{}: DMSO -{:.0}%, Other -{:.0}%, correct tag best {}",
            s.as_str(),
            100.0 * gains[0],
            100.0 * gains[1],
            if tag_ok { "yes" } else { "no" }
        ));
    }
    report(
        9,
        ok,
        format!(
            "minority-solvent mae_mol vs none (DMSO {:.4}, Other {:.4}), need >= {:.0}% lower and mae[a][a] < mae[a][b] for all a != b: {}",
            none.mae_mol_by_solvent[1],
            none.mae_mol_by_solvent[2],
            100.0 * SOLVENT_GAIN,
            parts.join("; ")
        ),
    )
}

struct Reports {
    ablation: String,
    sweep: String,
    solvent: String,
}

fn experiments(threads: usize) -> (AblationReport, Duration, SweepReport, SolventReport, Reports) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let t = Instant::now();
        let ablation = run_ablation(&ExperimentConfig::ablation(SEEDS.to_vec())).unwrap();
        let elapsed = t.elapsed();
        let sweep = run_lambda_sweep(&ExperimentConfig::ablation(SEEDS.to_vec()), &SWEEP_LAMBDAS).unwrap();
        let solvent = run_solvent_experiment(&ExperimentConfig::solvent(SEEDS.to_vec()), &Strategy::ALL).unwrap();
        let text = Reports {
            ablation: serde_json::to_string_pretty(&ablation).unwrap(),
            sweep: serde_json::to_string_pretty(&sweep).unwrap(),
            solvent: serde_json::to_string_pretty(&solvent).unwrap(),
        };
        (ablation, elapsed, sweep, solvent, text)
    })
}

fn criterion_10(first: &Reports, second: &Reports) -> Outcome {
    let same = [
        ("ablation", &first.ablation, &second.ablation),
        ("lambda sweep", &first.sweep, &second.sweep),
        ("solvent", &first.solvent, &second.solvent),
    ];
    let differing: Vec<&str> = same.iter().filter(|(_, a, b)| a != b).map(|(n, _, _)| *n).collect();
    let bytes: usize = same.iter().map(|(_, a, _)| a.len()).sum();
    report(
        10,
        differing.is_empty(),
        format!(
            "criteria 7-9 rerun with the same seeds on a 2-thread pool: {bytes} report bytes, byte-identical (tol 0 bytes); differing: {differing:?}"
        ),
    )
}

fn main() {
    // `cargo test -- <filter>` passes arguments; only the listing probe
    // needs an answer.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let (suite_report, suite_time) = suite();
    let mut outcomes = vec![
        criterion_1(&suite_report, suite_time),
        criterion_2(&suite_report),
        criterion_3(&suite_report),
        criterion_4(&suite_report),
        criterion_5(),
        criterion_6(),
    ];
    let (ablation, elapsed, sweep, solvent, first) = experiments(1);
    outcomes.push(criterion_7(&ablation, elapsed));
    outcomes.push(criterion_8(&sweep));
    outcomes.push(criterion_9(&solvent));
    let (_, _, _, _, second) = experiments(2);
    outcomes.push(criterion_10(&first, &second));

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        for o in failed {
            eprintln!("failed: {}", o.line);
        }
        std::process::exit(1);
    }
}

//! `shiftlit`: curation, loss checks, synthetic data, training and
//! evaluation from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (an error report is written when the subcommand takes `--report`),
//! 3 loss property suite failure.

mod output;

use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use shiftlit::curate::{
    dataset_stats, read_dataset, read_tsv, run_pipeline, split_dataset, write_dataset,
    DatasetEntry, ValidityConfig,
};
use shiftlit::setloss::suite::{run_suite, SuiteConfig};
use shiftlit::shiftnet::{Normalization, Strategy, ToyModel};
use shiftlit::specparse::{outcome_json, parse_spectrum, Nucleus};
use shiftlit::trainer::experiments::{
    run_ablation, run_lambda_sweep, run_solvent_experiment, ExperimentConfig, SWEEP_LAMBDAS,
};
use shiftlit::trainer::synth::{synth_generate, SynthConfig};
use shiftlit::trainer::{
    all_targets, cross_solvent_eval, curve_csv, evaluate, samples_from_entries, train,
    TrainConfig,
};

use output::{write_atomic, write_json};

#[derive(Parser)]
#[command(name = "shiftlit", version, about = "Semi-supervised NMR chemical shift learning")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log filter, e.g. `info` or `shiftlit=debug`; RUST_LOG also works.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse literature NMR strings, one per line, into JSON.
    Parse(ParseArgs),
    /// Curate raw (id, SMILES, spectra) records into a dataset.
    Validate(ValidateArgs),
    /// Summarise a dataset.
    Stats(StatsArgs),
    /// Split a dataset into train and test files.
    Split(SplitArgs),
    /// Run the loss equivalence, lemma and gradient property suites.
    Losscheck(LosscheckArgs),
    /// Generate the synthetic 1H benchmark.
    Synth(SynthArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Run the ablation, lambda sweep and solvent experiments.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Input file; standard input when absent or `-`.
    input: Option<PathBuf>,
    /// JSON Lines output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Tab-separated input: id, SMILES, then one spectrum per column.
    #[arg(long = "in")]
    input: PathBuf,
    /// Validity ranges and options (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Accepted entries (JSON Lines).
    #[arg(long)]
    out: PathBuf,
    /// Per-stage and per-rule counts (JSON).
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    dataset: PathBuf,
    /// JSON output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Fraction of entries in the training split.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct LosscheckArgs {
    /// Largest set size in the equivalence check.
    #[arg(long)]
    n: Option<usize>,
    /// Random instances in the equivalence check.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report; standard output when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic data settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weak (unassigned) molecules.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_labeled: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    n_paired: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for labeled, weak, test and paired JSONL files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Atom-assigned entries.
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Entries used as unassigned multisets.
    #[arg(long)]
    weak: Option<PathBuf>,
    #[arg(long, default_value = "1H")]
    nucleus: Nucleus,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// none, global_context, pre_backbone, post_backbone or scalar_correction.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model checkpoint (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV; defaults to the checkpoint path plus `.curve.csv`.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Also write a cross-solvent report here.
    #[arg(long)]
    cross: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Seeds as an inclusive range `a..b` or a comma list [default: 0..4].
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Experiment settings (TOML with `synth`, `train` and `seeds`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    /// Ablation report (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also run the lambda sweep and write it here.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Also run the solvent conditioning experiment and write it here.
    #[arg(long)]
    solvent: Option<PathBuf>,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let bad = |_| format!("bad seed list {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(bad)?;
        let b: u64 = b.trim_start_matches('=').trim().parse().map_err(bad)?;
        if b < a {
            return Err(format!("empty seed range {s:?}"));
        }
        Ok(Seeds((a..=b).collect()))
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(bad)).collect::<Result<_, _>>().map(Seeds)
    }
}

enum Failure {
    Usage(anyhow::Error),
    /// Bad input data; the report path, if any, receives the message.
    Data(anyhow::Error, Option<PathBuf>),
    Suite,
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>, report: Option<&Path>) -> Failure {
    Failure::Data(e.into(), report.map(Path::to_path_buf))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Split(a) => cmd_split(a),
        Command::Losscheck(a) => cmd_losscheck(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e, report)) => {
            eprintln!("data error: {e:#}");
            if let Some(path) = report {
                let body = serde_json::json!({
                    "schema": "shiftlit.error",
                    "version": 1,
                    "error": format!("{e:#}"),
                });
                if let Err(w) = write_json(&path, &body) {
                    eprintln!("error: writing {}: {w:#}", path.display());
                }
            }
            ExitCode::from(2)
        }
        Err(Failure::Suite) => ExitCode::from(3),
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load_dataset(path: &Path) -> anyhow::Result<Vec<DatasetEntry>> {
    read_dataset(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn dataset_bytes(entries: &[DatasetEntry]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, entries).expect("writing to memory");
    buf
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_parse(a: ParseArgs) -> Outcome {
    let mut text = String::new();
    match a.input.as_deref() {
        Some(p) if p != Path::new("-") => {
            open(p).and_then(|mut r| Ok(r.read_to_string(&mut text)?))
        }
        _ => std::io::stdin().lock().read_to_string(&mut text).map_err(Into::into),
    }
    .map_err(|e| data(e, None))?;
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(&outcome_json(&parse_spectrum(line)).to_string());
        out.push('\n');
    }
    emit(a.out.as_deref(), &out).map_err(usage)
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    let cfg = match &a.config {
        Some(p) => ValidityConfig::load(p).map_err(usage)?,
        None => ValidityConfig::default(),
    };
    let report = Some(a.report.as_path());
    let raw = open(&a.input)
        .and_then(|r| Ok(read_tsv(r, &a.input.display().to_string())?))
        .map_err(|e| data(e, report))?;
    let out = run_pipeline(&raw, &cfg);
    info!(
        "{} entries: {} accepted, {} rejected",
        out.report.total, out.report.accepted, out.report.rejected
    );
    write_atomic(&a.out, &dataset_bytes(&out.accepted)).map_err(usage)?;
    write_json(&a.report, &out.report).map_err(usage)
}

fn cmd_stats(a: StatsArgs) -> Outcome {
    let entries = load_dataset(&a.dataset).map_err(|e| data(e, None))?;
    let text = serde_json::to_string_pretty(&dataset_stats(&entries)).expect("serializable") + "\n";
    emit(a.out.as_deref(), &text).map_err(usage)
}

fn cmd_split(a: SplitArgs) -> Outcome {
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(usage(anyhow!("--ratio must lie strictly between 0 and 1")));
    }
    let entries = load_dataset(&a.input).map_err(|e| data(e, None))?;
    let (train, test) = split_dataset(&entries, a.ratio, a.seed);
    info!("{} train, {} test", train.len(), test.len());
    write_atomic(&a.train_out, &dataset_bytes(&train)).map_err(usage)?;
    write_atomic(&a.test_out, &dataset_bytes(&test)).map_err(usage)
}

fn cmd_losscheck(a: LosscheckArgs) -> Outcome {
    let d = SuiteConfig::default();
    let cfg = SuiteConfig {
        iters: a.iters.unwrap_or(d.iters),
        max_n: a.n.unwrap_or(d.max_n),
        seed: a.seed,
        ..d
    };
    if cfg.max_n == 0 {
        return Err(usage(anyhow!("--n must be at least 1")));
    }
    let report = run_suite(&cfg);
    for c in &report.checks {
        info!("{}: {} ({} failures)", c.name, if c.passed { "pass" } else { "FAIL" }, c.failures);
    }
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    emit(a.report.as_deref(), &text).map_err(usage)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Suite)
    }
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => load_toml(p).map_err(usage)?,
        None => SynthConfig::default(),
    };
    cfg.n_weak = a.n.unwrap_or(cfg.n_weak);
    cfg.n_labeled = a.n_labeled.unwrap_or(cfg.n_labeled);
    cfg.n_test = a.n_test.unwrap_or(cfg.n_test);
    cfg.n_paired = a.n_paired.unwrap_or(cfg.n_paired);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let d = synth_generate(&cfg);
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(usage)?;
    for (name, entries) in [
        ("labeled", &d.labeled),
        ("weak", &d.weak),
        ("test", &d.test),
        ("paired", &d.paired),
    ] {
        write_atomic(&a.out.join(format!("{name}.jsonl")), &dataset_bytes(entries)).map_err(usage)?;
    }
    write_json(&a.out.join("synth.json"), &cfg).map_err(usage)
}

fn train_config(a: &TrainArgs) -> anyhow::Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.total_steps = a.steps.or(cfg.total_steps);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.peak_lr = a.lr.unwrap_or(cfg.peak_lr);
    cfg.hidden = a.hidden.unwrap_or(cfg.hidden);
    cfg.strategy = a.strategy.unwrap_or(cfg.strategy);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let cfg = train_config(&a).map_err(usage)?;
    if a.labeled.is_none() && a.weak.is_none() {
        return Err(usage(anyhow!("give --labeled, --weak or both")));
    }
    let load = |p: &Option<PathBuf>, keep: bool| -> anyhow::Result<_> {
        match p {
            Some(p) => Ok(samples_from_entries(&load_dataset(p)?, a.nucleus, keep)
                .with_context(|| format!("featurizing {}", p.display()))?),
            None => Ok(Vec::new()),
        }
    };
    let labeled = load(&a.labeled, true).map_err(|e| data(e, None))?;
    let weak = load(&a.weak, false).map_err(|e| data(e, None))?;
    info!("{} labeled and {} weak samples", labeled.len(), weak.len());
    let weak_used: &[_] = if cfg.lambda > 0.0 { &weak } else { &[] };
    let targets = all_targets([labeled.as_slice(), weak_used]);
    if targets.is_empty() {
        return Err(data(anyhow!("no {} targets in the training data", a.nucleus), None));
    }
    let model = ToyModel::new(cfg.model_config(), a.nucleus, Normalization::fit(&targets), cfg.seed);
    let out = train(&cfg, &labeled, &weak, model).map_err(|e| data(e, None))?;
    let curve = a.curve.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".curve.csv");
        PathBuf::from(s)
    });
    write_atomic(&a.out, (out.model.to_json() + "\n").as_bytes()).map_err(usage)?;
    write_atomic(&curve, curve_csv(&out.curve).as_bytes()).map_err(usage)
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let report = Some(a.report.as_path());
    let model = std::fs::read_to_string(&a.model)
        .with_context(|| format!("reading {}", a.model.display()))
        .and_then(|t| ToyModel::from_json(&t).with_context(|| format!("loading {}", a.model.display())))
        .map_err(usage)?;
    let samples = load_dataset(&a.data)
        .and_then(|e| Ok(samples_from_entries(&e, model.nucleus, true)?))
        .map_err(|e| data(e, report))?;
    let r = evaluate(&model, &samples).map_err(|e| data(e, report))?;
    write_json(&a.report, &r).map_err(usage)?;
    if let Some(p) = &a.cross {
        let c = cross_solvent_eval(&model, &samples).map_err(|e| data(e, report))?;
        write_json(p, &c).map_err(usage)?;
    }
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Outcome {
    let mut ablation = match &a.config {
        Some(p) => load_toml(p).map_err(usage)?,
        None => ExperimentConfig::ablation((0..5).collect()),
    };
    if let Some(Seeds(s)) = a.seeds {
        ablation.seeds = s;
    }
    if let Some(s) = a.steps {
        ablation.train.total_steps = Some(s);
    }
    if ablation.seeds.is_empty() {
        return Err(usage(anyhow!("no seeds")));
    }
    let r = run_ablation(&ablation).map_err(|e| data(e, None))?;
    write_json(&a.out, &r).map_err(usage)?;
    if let Some(p) = &a.sweep {
        let r = run_lambda_sweep(&ablation, &SWEEP_LAMBDAS).map_err(|e| data(e, None))?;
        write_json(p, &r).map_err(usage)?;
    }
    if let Some(p) = &a.solvent {
        let solvent = ExperimentConfig {
            synth: SynthConfig {
                solvent_effect: SynthConfig::default().solvent_effect,
                ..ablation.synth.clone()
            },
            ..ablation.clone()
        };
        let r = run_solvent_experiment(&solvent, &Strategy::ALL).map_err(|e| data(e, None))?;
        write_json(p, &r).map_err(usage)?;
    }
    Ok(())
}

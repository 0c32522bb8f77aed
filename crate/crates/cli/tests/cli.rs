use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shiftlit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftlit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&shiftlit(&["frobnicate"])), 1);
    assert_eq!(code(&shiftlit(&[])), 1);
    assert_eq!(code(&shiftlit(&["train", "--bogus"])), 1);
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "parse", "validate", "stats", "split", "losscheck", "synth", "train", "eval", "ablate",
    ] {
        let o = shiftlit(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"), "{sub}");
    }
}

#[test]
fn losscheck_passes() {
    let o = shiftlit(&["losscheck", "--iters", "1000", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["passed"], true);
}

#[test]
fn parse_emits_one_object_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "1H NMR (400 MHz, CDCl3) δ 7.26 (s, 1H)\nnot a spectrum\n").unwrap();
    let o = shiftlit(&["parse", p(&input)]);
    assert_eq!(code(&o), 0);
    let lines: Vec<serde_json::Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["solvent_class"], "CDCl3");
    assert!(lines[1].get("error").is_some());
}

#[test]
fn validate_reports_isotope_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.tsv");
    fs::write(
        &input,
        "iso\t[13C]O\t1H NMR (400 MHz, CDCl3) δ 3.40 (s, 3H), 1.10 (s, 1H)\n",
    )
    .unwrap();
    let out = dir.path().join("dataset.jsonl");
    let report = dir.path().join("report.json");
    let o = shiftlit(&["validate", "--in", p(&input), "--out", p(&out), "--report", p(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["rejected"], 1);
    assert_eq!(r["accepted"], 0);
    assert_eq!(r["rules"]["has_isotope"], 1);
    assert_eq!(r["rejections"][0]["rule"], "has_isotope");
}

#[test]
fn malformed_input_is_a_data_error_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.tsv");
    fs::write(&input, "only-one-column\n").unwrap();
    let out = dir.path().join("dataset.jsonl");
    let report = dir.path().join("report.json");
    let o = shiftlit(&["validate", "--in", p(&input), "--out", p(&out), "--report", p(&report)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists(), "no partial output");
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["schema"], "shiftlit.error");
}

#[test]
fn synth_train_eval_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = shiftlit(&[
        "synth", "--n", "60", "--n-labeled", "20", "--n-test", "30", "--n-paired", "5", "--seed",
        "7", "--out", p(&data),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["labeled", "weak", "test", "paired"] {
        assert!(data.join(format!("{f}.jsonl")).exists());
    }

    let stats = shiftlit(&["stats", p(&data.join("weak.jsonl"))]);
    let s: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(s["entries"], 60);

    let cfg = dir.path().join("train.toml");
    fs::write(&cfg, "hidden = 16\ntotal_steps = 40\nlambda = 4.0\n").unwrap();
    let mut reports = Vec::new();
    for run in 0..2 {
        let model = dir.path().join(format!("model{run}.ckpt"));
        let report = dir.path().join(format!("eval{run}.json"));
        let o = shiftlit(&[
            "train",
            "--config",
            p(&cfg),
            "--labeled",
            p(&data.join("labeled.jsonl")),
            "--weak",
            p(&data.join("weak.jsonl")),
            "--steps",
            "30",
            "--seed",
            "3",
            "--out",
            p(&model),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let curve = fs::read_to_string(dir.path().join(format!("model{run}.ckpt.curve.csv"))).unwrap();
        assert!(curve.starts_with("step,total,supervised,weak\n"));
        // the flag overrides the file's 40 steps
        assert_eq!(curve.lines().count(), 31);

        let o = shiftlit(&[
            "--threads",
            if run == 0 { "1" } else { "3" },
            "eval",
            "--model",
            p(&model),
            "--data",
            p(&data.join("test.jsonl")),
            "--report",
            p(&report),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(fs::read(&report).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let r: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(r["nuclei"]["1H"]["overall"]["molecules"], 30);
    assert!(r["nuclei"]["1H"]["overall"]["mae_atom"].as_f64().unwrap().is_finite());
}

#[test]
fn split_keeps_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = shiftlit(&[
        "synth", "--n", "40", "--n-labeled", "0", "--n-test", "0", "--n-paired", "0", "--out",
        p(&data),
    ]);
    assert_eq!(code(&o), 0);
    let (train, test) = (dir.path().join("train.jsonl"), dir.path().join("test.jsonl"));
    let o = shiftlit(&[
        "split",
        "--in",
        p(&data.join("weak.jsonl")),
        "--seed",
        "2",
        "--train-out",
        p(&train),
        "--test-out",
        p(&test),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let count = |f: &Path| fs::read_to_string(f).unwrap().lines().count() - 1;
    assert_eq!(count(&train) + count(&test), 40);
    assert!(count(&test) > 0);
}

#[test]
fn bad_ratio_is_a_usage_error() {
    let o = shiftlit(&["split", "--in", "x", "--ratio", "1.5", "--train-out", "a", "--test-out", "b"]);
    assert_eq!(code(&o), 1);
}

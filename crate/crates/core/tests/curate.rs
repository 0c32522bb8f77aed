use proptest::prelude::*;
use shiftlit::chemgraph::{canonical_smiles, parse_smiles, Element};
use shiftlit::curate::{
    dataset_stats, read_dataset, run_pipeline, split_dataset, write_dataset, RawEntry,
    ValidityConfig,
};
use shiftlit::specparse::{parse_spectrum, Nucleus};

const SMILES: [&str; 12] = [
    "c1ccccc1",
    "CCO",
    "CC(=O)C",
    "Cc1ccc(C)cc1",
    "CC(C)O",
    "OC(=O)c1ccccc1",
    "CCN(CC)CC",
    "FC(F)(F)c1ccccc1",
    "ClCCl",
    "CS(=O)C",
    "NCCO",
    "C1CCCCC1",
];

fn solvent() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("CDCl3"), Just("DMSO-d6"), Just("CD3OD"), Just("")]
}

fn header(nucleus: &str, solvent: &str) -> String {
    if solvent.is_empty() {
        format!("{nucleus} NMR δ ")
    } else {
        format!("{nucleus} NMR (400 MHz, {solvent}) δ ")
    }
}

/// Orders peaks descending, or leaves them shuffled when `scramble` is set.
fn order(v: &mut [(f64, u32)], scramble: bool) {
    if !scramble {
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
}

/// A carbon spectrum whose peak count is usually the class count.
fn carbon_text(smiles: &'static str) -> impl Strategy<Value = String> {
    let classes = parse_smiles(smiles).unwrap().classes_of(Element::C).len();
    let count = prop_oneof![
        4 => Just(classes),
        1 => Just(classes + 1),
        1 => Just(classes.saturating_sub(1).max(1)),
    ];
    (solvent(), count, prop::bool::weighted(0.1))
        .prop_flat_map(|(solv, n, scramble)| {
            (Just(solv), prop::collection::vec(-12.0f64..232.0, n), Just(scramble))
        })
        .prop_map(|(solv, v, scramble)| {
            let mut v: Vec<(f64, u32)> = v.into_iter().map(|x| (x, 0)).collect();
            order(&mut v, scramble);
            let peaks: Vec<String> = v.iter().map(|x| format!("{:.1}", x.0)).collect();
            header("13C", solv) + &peaks.join(", ")
        })
}

/// A proton spectrum whose integrations sum to the hydrogen count, less a
/// small deficit some of the time.
fn proton_text(smiles: &'static str) -> impl Strategy<Value = String> {
    let nh = parse_smiles(smiles).unwrap().hydrogen_count() as u32;
    let deficit = prop_oneof![4 => Just(0u32), 1 => Just(1u32), 1 => Just(2u32)];
    (solvent(), deficit, 1..=6usize, prop::bool::weighted(0.1))
        .prop_flat_map(move |(solv, deficit, k, scramble)| {
            let total = nh.saturating_sub(deficit).max(1);
            let k = k.min(total as usize);
            (
                Just(solv),
                prop::collection::vec(-1.2f64..15.2, k),
                Just(total),
                Just(scramble),
            )
        })
        .prop_map(|(solv, shifts, total, scramble)| {
            let k = shifts.len() as u32;
            let mut peaks: Vec<(f64, u32)> = shifts.into_iter().map(|s| (s, 1)).collect();
            peaks[0].1 += total - k;
            order(&mut peaks, scramble);
            let parts: Vec<String> = peaks
                .iter()
                .map(|(s, n)| format!("{s:.2} (s, {n}H)"))
                .collect();
            header("1H", solv) + &parts.join(", ")
        })
}

fn raw_entry() -> impl Strategy<Value = RawEntry> {
    (prop::sample::select(&SMILES[..]), any::<u16>()).prop_flat_map(|(smiles, id)| {
        (
            Just(smiles),
            Just(id),
            prop::option::of(carbon_text(smiles)),
            prop::option::of(proton_text(smiles)),
        )
            .prop_map(|(smiles, id, c, h)| RawEntry {
                id: format!("m{id}"),
                smiles: smiles.to_string(),
                spectra: c.into_iter().chain(h).collect(),
                provenance: "generated".into(),
            })
    })
}

fn config() -> impl Strategy<Value = ValidityConfig> {
    any::<bool>().prop_map(|lenient| ValidityConfig {
        lenient,
        ..ValidityConfig::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn no_silent_drops(entries in prop::collection::vec(raw_entry(), 0..20), cfg in config()) {
        let out = run_pipeline(&entries, &cfg);
        let r = &out.report;
        prop_assert_eq!(r.total, entries.len());
        prop_assert_eq!(r.accepted + r.rejected, r.total);
        prop_assert_eq!(r.rejections.len(), r.rejected);
        prop_assert_eq!(r.rules.values().sum::<usize>(), r.rejected);
        for rej in &r.rejections {
            prop_assert!(!rej.rule.is_empty());
        }
        for e in &out.accepted {
            prop_assert!(e.accepted());
            prop_assert!(!e.verdicts.is_empty());
        }
    }

    #[test]
    fn accepted_targets_match_structures(
        entries in prop::collection::vec(raw_entry(), 1..20),
        cfg in config(),
    ) {
        for e in run_pipeline(&entries, &cfg).accepted {
            for (spec, t) in e.spectra.iter().zip(&e.targets) {
                prop_assert_eq!(spec.nucleus, t.nucleus);
                prop_assert!(t.shifts.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(t.shifts.len(), t.sites.len());
                match t.nucleus {
                    Nucleus::C13 => {
                        let classes = e.molecule.classes_of(Element::C).len();
                        prop_assert_eq!(spec.peaks.len(), classes);
                        prop_assert_eq!(t.len(), e.molecule.count_element(Element::C));
                    }
                    Nucleus::H1 => {
                        let sum: u32 = spec.peaks.iter().map(|p| p.integration.unwrap()).sum();
                        prop_assert_eq!(sum as usize, t.len());
                        if !cfg.lenient {
                            prop_assert_eq!(t.len(), e.molecule.hydrogen_count());
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn pipeline_is_idempotent(entries in prop::collection::vec(raw_entry(), 1..20), cfg in config()) {
        let first = run_pipeline(&entries, &cfg).accepted;
        let again: Vec<RawEntry> = first.iter().map(RawEntry::from_entry).collect();
        let second = run_pipeline(&again, &cfg);
        prop_assert_eq!(second.report.rejected, 0);
        prop_assert_eq!(second.accepted, first);
    }

    #[test]
    fn pipeline_is_deterministic(entries in prop::collection::vec(raw_entry(), 0..20)) {
        let cfg = ValidityConfig::default();
        prop_assert_eq!(run_pipeline(&entries, &cfg), run_pipeline(&entries, &cfg));
    }

    #[test]
    fn dataset_file_round_trips(entries in prop::collection::vec(raw_entry(), 0..20)) {
        let accepted = run_pipeline(&entries, &ValidityConfig { lenient: true, ..Default::default() }).accepted;
        let mut buf = Vec::new();
        write_dataset(&mut buf, &accepted).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &accepted);
        prop_assert_eq!(dataset_stats(&back), dataset_stats(&accepted));
    }

    #[test]
    fn split_guards_leakage(
        entries in prop::collection::vec(raw_entry(), 2..30),
        seed in any::<u64>(),
        ratio in 0.1f64..0.9,
    ) {
        let accepted = run_pipeline(&entries, &ValidityConfig { lenient: true, ..Default::default() }).accepted;
        prop_assume!(!accepted.is_empty());
        let (train, test) = split_dataset(&accepted, ratio, seed);
        prop_assert_eq!(train.len() + test.len(), accepted.len());
        let key = |e: &shiftlit::curate::DatasetEntry| canonical_smiles(&e.molecule);
        let train_keys: std::collections::BTreeSet<String> = train.iter().map(key).collect();
        for e in &test {
            prop_assert!(!train_keys.contains(&key(e)));
        }
        prop_assert!(train.len() <= (ratio * accepted.len() as f64).round() as usize);
        prop_assert_eq!(split_dataset(&accepted, ratio, seed), (train, test));
    }
}

fn raw(smiles: &str, spectra: &[&str]) -> RawEntry {
    RawEntry {
        id: smiles.to_string(),
        smiles: smiles.to_string(),
        spectra: spectra.iter().map(|s| s.to_string()).collect(),
        provenance: "t".into(),
    }
}

#[test]
fn acetone_carbon_multiset() {
    let e = raw("CC(=O)C", &["13C NMR (CDCl3) δ 206.0, 30.9"]);
    let strict = run_pipeline(std::slice::from_ref(&e), &ValidityConfig::default());
    assert_eq!(strict.report.rules["unequal_class_sizes"], 1);
    let lenient = ValidityConfig {
        lenient: true,
        ..ValidityConfig::default()
    };
    let out = run_pipeline(&[e], &lenient);
    assert_eq!(out.accepted[0].targets[0].shifts, vec![30.9, 30.9, 206.0]);
}

#[test]
fn heteroatom_entries_are_labeled() {
    let out = run_pipeline(
        &[
            raw("FC(F)(F)C(F)(F)F", &["19F NMR (CDCl3) δ -88.2"]),
            raw("FC1=CC=CC=C1", &["19F NMR (CDCl3) δ -113.2"]),
            raw("FCC(F)(F)F", &["19F NMR δ -75.0"]),
            // heteroatom entries skip the element whitelist
            raw("FC(F)(F)Br", &["19F NMR δ -22.0"]),
        ],
        &ValidityConfig::default(),
    );
    assert_eq!(out.report.accepted, 3);
    assert_eq!(out.report.rules["heteroatom_label"], 1);
    let t = &out.accepted[0].targets[0];
    assert_eq!(t.atom_map.as_ref().unwrap().len(), 6);
    assert!(out.accepted.iter().all(|e| e.labeled));
}

#[test]
fn whitelist_applies_to_carbon_entries() {
    let out = run_pipeline(
        &[raw("CCBr", &["13C NMR δ 27.0, 19.4"])],
        &ValidityConfig::default(),
    );
    assert_eq!(out.report.rules["outside_element_whitelist"], 1);
}

#[test]
fn partial_and_missing_integration_are_rejected() {
    let out = run_pipeline(
        &[
            raw("c1ccccc1", &["13C NMR (CDCl3) δ 128.4, ???"]),
            raw("c1ccccc1", &["1H NMR (CDCl3) δ 7.26 (s)"]),
        ],
        &ValidityConfig::default(),
    );
    let rules: Vec<&str> = out.report.rejections.iter().map(|r| r.rule.as_str()).collect();
    assert_eq!(rules, ["partial_spectrum", "missing_integration"]);
    assert!(parse_spectrum("13C NMR (CDCl3) δ 128.4, ???").unwrap().partial);
}

#[test]
fn stats_summarize_targets() {
    let out = run_pipeline(
        &[
            raw("c1ccccc1", &["13C NMR (CDCl3) δ 128.4", "1H NMR (CDCl3) δ 7.36 (s, 6H)"]),
            raw("C1CCCCC1", &["13C NMR (DMSO-d6) δ 27.1"]),
        ],
        &ValidityConfig::default(),
    );
    let s = dataset_stats(&out.accepted);
    assert_eq!((s.entries, s.accepted, s.unique_smiles), (2, 2, 2));
    assert_eq!(s.by_nucleus["13C"].target_atoms, 12);
    assert_eq!(s.by_nucleus["1H"].entries, 1);
    assert_eq!(s.by_solvent["CDCl3"], 2);
    assert_eq!(s.by_solvent["DMSO-d6"], 1);
}

#[test]
fn dataset_header_is_required() {
    assert!(read_dataset("{\"id\":1}\n".as_bytes()).is_err());
    assert!(read_dataset("".as_bytes()).is_err());
    let empty = read_dataset("{\"schema\":\"shiftlit.dataset\",\"version\":1}\n".as_bytes());
    assert!(empty.unwrap().is_empty());
}

#[test]
fn generator_reaches_every_stage() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, TestRng, TestRunner};
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(Config::default().rng_algorithm));
    let entries: Vec<RawEntry> = (0..400)
        .map(|_| raw_entry().new_tree(&mut runner).unwrap().current())
        .collect();
    let lenient = ValidityConfig {
        lenient: true,
        ..ValidityConfig::default()
    };
    let out = run_pipeline(&entries, &lenient);
    eprintln!("{:?}", out.report.rules);
    assert!(out.report.accepted >= 40, "{} accepted", out.report.accepted);
    assert!(out.accepted.iter().any(|e| e.targets.len() == 2));
    for rule in ["monotonic", "carbon_count", "hydrogen_count"] {
        assert!(out.report.rules.contains_key(rule), "{rule}");
    }
}

//! Synthetic ¹H benchmark: small molecules from a template grammar with
//! shifts given by a fixed linear function of the atom features.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chemgraph::{parse_smiles, write_smiles, Element, Molecule};
use crate::curate::{
    check_consistency, check_nmr_validity, check_structure, hydrogen_sites, DatasetEntry,
    ValidityConfig,
};
use crate::shiftnet::{atom_features, slot, AROMATIC, DEGREE, D, ELEMENT, HYDROGENS, H_ROW, RADIUS1, RADIUS2};
use crate::specparse::{Multiplicity, Nucleus, Peak, SolventClass, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_labeled: usize,
    pub n_weak: usize,
    pub n_test: usize,
    /// Molecules recorded under every solvent class.
    pub n_paired: usize,
    pub seed: u64,
    /// Standard deviation of the per-environment noise, ppm.
    pub noise: f64,
    /// The same for the weak split, whose values stand in for less
    /// carefully measured literature data.
    pub weak_noise: f64,
    /// Offset added to every shift, ppm, for CDCl3, DMSO-d6 and Other.
    pub solvent_effect: [f64; 3],
    /// Sampling weights of the three solvent classes.
    pub solvent_mix: [f64; 3],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_labeled: 100,
            n_weak: 5000,
            n_test: 500,
            n_paired: 100,
            seed: 0,
            noise: 0.05,
            weak_noise: 0.15,
            solvent_effect: [0.0, 0.5, -0.3],
            solvent_mix: [0.6, 0.25, 0.15],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// Narrow templates, atom-assigned.
    pub labeled: Vec<DatasetEntry>,
    /// Broad templates, multisets only.
    pub weak: Vec<DatasetEntry>,
    /// Broad templates, atom-assigned.
    pub test: Vec<DatasetEntry>,
    /// Broad templates, each molecule once per solvent class, atom-assigned.
    pub paired: Vec<DatasetEntry>,
}

const SOLVENTS: [(SolventClass, &str); 3] = [
    (SolventClass::CDCl3, "CDCl3"),
    (SolventClass::DmsoD6, "DMSO-d6"),
    (SolventClass::Other, "CD3OD"),
];

/// Generating function: `(column, ppm)` pairs plus an intercept.
pub const TRUTH_INTERCEPT: f64 = 0.9;

pub fn truth_weights() -> [f64; D] {
    let mut w = [0.0; D];
    w[ELEMENT + slot(Element::N)] = 0.6;
    w[ELEMENT + slot(Element::O)] = 1.6;
    w[ELEMENT + slot(Element::S)] = 0.4;
    w[DEGREE] = 0.2;
    w[HYDROGENS] = -0.15;
    w[AROMATIC] = 5.3;
    w[RADIUS1 + slot(Element::C)] = 0.1;
    w[RADIUS1 + slot(Element::N)] = 1.5;
    w[RADIUS1 + slot(Element::O)] = 2.3;
    w[RADIUS1 + slot(Element::F)] = 3.4;
    w[RADIUS1 + slot(Element::S)] = 1.6;
    w[RADIUS1 + slot(Element::Cl)] = 2.5;
    w[RADIUS2 + slot(Element::C)] = 0.05;
    w[RADIUS2 + slot(Element::N)] = 0.6;
    w[RADIUS2 + slot(Element::O)] = 0.9;
    w[RADIUS2 + slot(Element::F)] = 0.4;
    w[RADIUS2 + slot(Element::S)] = 0.3;
    w[RADIUS2 + slot(Element::Cl)] = 0.4;
    w[H_ROW] = 0.0;
    w
}

/// Noise-free shift of a feature row before the solvent offset.
pub fn ground_truth(row: &[f64]) -> f64 {
    TRUTH_INTERCEPT + row.iter().zip(truth_weights()).map(|(x, w)| x * w).sum::<f64>()
}

// Cores take an optional leading substituent and, where a `{}` appears,
// a second one as a branch.
const NARROW_CORES: [&str; 10] = [
    "C",
    "CC",
    "CCC",
    "CC({})C",
    "CCCC({})",
    "c1ccccc1",
    "c1ccc({})cc1",
    "c1cccc({})c1",
    "C1CCCCC1",
    "C1CCC({})CC1",
];
const BROAD_CORES: [&str; 8] = [
    "c1ccncc1",
    "c1ccc({})nc1",
    "c1cccs1",
    "c1ccc({})s1",
    "c1ccco1",
    "c1ccc({})o1",
    "C1CCCC1",
    "C1CC({})CC1",
];
// (leading form, branch form)
const NARROW_SUBS: [(&str, &str); 8] = [
    ("C", "C"),
    ("CC", "CC"),
    ("O", "O"),
    ("CO", "OC"),
    ("CC(=O)", "C(C)=O"),
    ("COC(=O)", "C(=O)OC"),
    ("CC(=O)O", "OC(C)=O"),
    ("O=C", "C=O"),
];
const BROAD_SUBS: [(&str, &str); 10] = [
    ("F", "F"),
    ("Cl", "Cl"),
    ("N", "N"),
    ("CN", "NC"),
    ("CS", "SC"),
    ("S", "S"),
    ("N#C", "C#N"),
    ("NC(=O)", "C(N)=O"),
    ("FC(F)(F)", "C(F)(F)F"),
    ("OC(=O)", "C(=O)O"),
];

fn template_smiles(rng: &mut ChaCha8Rng, broad: bool) -> String {
    let mut cores: Vec<&str> = NARROW_CORES.to_vec();
    let mut subs: Vec<(&str, &str)> = NARROW_SUBS.to_vec();
    if broad {
        cores.extend(BROAD_CORES);
        subs.extend(BROAD_SUBS);
    }
    let core = *cores.choose(rng).expect("cores");
    let lead = if rng.random_bool(0.8) {
        subs.choose(rng).expect("subs").0
    } else {
        ""
    };
    let branch = subs.choose(rng).expect("subs").1;
    format!("{lead}{}", core.replace("{}", branch))
}

/// Shifts per hydrogen site (ascending parent order, as in
/// [`hydrogen_sites`]), sharing one noise draw per equivalence class.
fn hydrogen_shifts(mol: &Molecule, offset: f64, noise: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let sites = hydrogen_sites(mol);
    let classes = mol.equiv_class();
    let shifts = sites
        .iter()
        .map(|&p| {
            let mut row = atom_features(mol, p);
            row[H_ROW] = 1.0;
            ground_truth(&row) + offset + noise[classes[p]]
        })
        .collect();
    (sites, shifts)
}

fn noise_draws(mol: &Molecule, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..mol.len()).map(|_| normal.sample(rng)).collect()
}

/// One peak per group of hydrogens with equal shift, highest first.
fn spectrum(shifts: &[f64], solvent: usize) -> Spectrum {
    let mut counts: BTreeMap<u64, (f64, u32)> = BTreeMap::new();
    for &s in shifts {
        // order-preserving key for finite floats
        let k = s.to_bits() ^ if s < 0.0 { u64::MAX } else { 1 << 63 };
        counts.entry(k).or_insert((s, 0)).1 += 1;
    }
    let (class, raw) = SOLVENTS[solvent];
    Spectrum {
        nucleus: Nucleus::H1,
        frequency_mhz: Some(400.0),
        solvent_raw: raw.to_string(),
        solvent_class: class,
        peaks: counts
            .values()
            .rev()
            .map(|&(s, n)| Peak {
                integration: Some(n),
                multiplicity: Multiplicity::Unknown,
                ..Peak::point(s)
            })
            .collect(),
        partial: false,
    }
}

fn entry(
    id: String,
    mol: &Molecule,
    solvent: usize,
    offset: f64,
    noise: &[f64],
    labeled: bool,
) -> DatasetEntry {
    let cfg = ValidityConfig::default();
    let (sites, shifts) = hydrogen_shifts(mol, offset, noise);
    let spec = spectrum(&shifts, solvent);
    let mut verdicts = vec![check_structure(mol, &[Nucleus::H1])];
    verdicts.push(check_nmr_validity(&spec, &cfg));
    let (v, target) = check_consistency(mol, &spec, &cfg).expect("integrations present");
    verdicts.push(v);
    let mut targets: Vec<_> = target.into_iter().collect();
    if labeled {
        for t in &mut targets {
            let mut pairs: Vec<(f64, usize)> = shifts.iter().copied().zip(sites.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            t.shifts = pairs.iter().map(|p| p.0).collect();
            t.atom_map = Some(pairs.iter().map(|p| p.1).collect());
        }
    }
    DatasetEntry {
        id: id.clone(),
        smiles: write_smiles(mol),
        molecule: mol.clone(),
        spectra: vec![spec],
        targets,
        labeled,
        verdicts,
        provenance: format!("synth:{id}"),
    }
}

struct Split<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    mix: WeightedIndex<f64>,
}

impl Split<'_> {
    fn molecule(&mut self, broad: bool) -> Molecule {
        let s = template_smiles(&mut self.rng, broad);
        parse_smiles(&s).unwrap_or_else(|e| panic!("template {s}: {e}"))
    }

    fn entries(
        &mut self,
        name: &str,
        n: usize,
        broad: bool,
        labeled: bool,
        sigma: f64,
    ) -> Vec<DatasetEntry> {
        (0..n)
            .map(|i| {
                let mol = self.molecule(broad);
                let solvent = self.mix.sample(&mut self.rng);
                let noise = noise_draws(&mol, sigma, &mut self.rng);
                let offset = self.cfg.solvent_effect[solvent];
                entry(format!("{name}-{i:05}"), &mol, solvent, offset, &noise, labeled)
            })
            .collect()
    }
}

/// Deterministic in `cfg`; each split draws from its own random stream, so
/// changing one split size leaves the others unchanged.
pub fn synth_generate(cfg: &SynthConfig) -> SynthData {
    let mix = WeightedIndex::new(cfg.solvent_mix).expect("solvent mix weights");
    let split = |id: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(id);
        Split {
            cfg,
            rng,
            mix: mix.clone(),
        }
    };
    let labeled = split(1).entries("labeled", cfg.n_labeled, false, true, cfg.noise);
    let weak = split(2).entries("weak", cfg.n_weak, true, false, cfg.weak_noise);
    let test = split(3).entries("test", cfg.n_test, true, true, cfg.noise);
    let mut p = split(4);
    let mut paired = Vec::with_capacity(3 * cfg.n_paired);
    for i in 0..cfg.n_paired {
        let mol = p.molecule(true);
        let noise = noise_draws(&mol, cfg.noise, &mut p.rng);
        for (c, &offset) in cfg.solvent_effect.iter().enumerate() {
            let id = format!("paired-{i:05}-{}", SOLVENTS[c].1);
            paired.push(entry(id, &mol, c, offset, &noise, true));
        }
    }
    SynthData {
        labeled,
        weak,
        test,
        paired,
    }
}

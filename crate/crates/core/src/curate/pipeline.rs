use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    check_consistency, check_nmr_validity, check_structure, ConsistencyError, DatasetEntry,
    ValidityConfig, Verdict,
};
use crate::chemgraph::parse_smiles;
use crate::specparse::{parse_spectrum, render, Spectrum};

/// One input record: a structure and its literature spectrum strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEntry {
    pub id: String,
    pub smiles: String,
    pub spectra: Vec<String>,
    pub provenance: String,
}

impl RawEntry {
    /// Raw form of a curated entry, with spectra in canonical text.
    pub fn from_entry(e: &DatasetEntry) -> RawEntry {
        RawEntry {
            id: e.id.clone(),
            smiles: e.smiles.clone(),
            spectra: e.spectra.iter().map(render).collect(),
            provenance: e.provenance.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {0}: expected id, smiles and at least one spectrum")]
    TooFewColumns(usize),
}

/// Tab-separated `id`, `smiles`, then one column per spectrum. Blank lines
/// and lines starting with `#` are skipped.
pub fn read_tsv<R: BufRead>(r: R, source: &str) -> Result<Vec<RawEntry>, TsvError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(TsvError::TooFewColumns(i + 1));
        }
        out.push(RawEntry {
            id: cols[0].trim().to_string(),
            smiles: cols[1].trim().to_string(),
            spectra: cols[2..]
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            provenance: format!("{source}:{}", i + 1),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub id: String,
    pub provenance: String,
    pub stage: String,
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurationReport {
    pub schema: &'static str,
    pub version: u32,
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub labeled: usize,
    pub stages: BTreeMap<&'static str, StageCounts>,
    /// Rejections per violated rule.
    pub rules: BTreeMap<String, usize>,
    pub rejections: Vec<Rejection>,
}

impl Default for CurationReport {
    fn default() -> Self {
        CurationReport {
            schema: "shiftlit.curation_report",
            version: 1,
            total: 0,
            accepted: 0,
            rejected: 0,
            labeled: 0,
            stages: ["structure", "nmr_validity", "consistency"]
                .into_iter()
                .map(|s| (s, StageCounts::default()))
                .collect(),
            rules: BTreeMap::new(),
            rejections: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutput {
    /// Accepted entries in input order.
    pub accepted: Vec<DatasetEntry>,
    pub report: CurationReport,
}

/// Result of one entry: the verdicts so far, and the entry if every
/// stage passed.
struct Processed {
    verdicts: Vec<Verdict>,
    entry: Option<DatasetEntry>,
}

fn process(raw: &RawEntry, cfg: &ValidityConfig) -> Processed {
    let mut verdicts = Vec::new();
    macro_rules! reject {
        ($v:expr) => {{
            verdicts.push($v);
            return Processed {
                verdicts,
                entry: None,
            };
        }};
    }

    let mol = match parse_smiles(&raw.smiles) {
        Ok(m) => m,
        Err(e) => reject!(Verdict::fail("structure", "invalid_smiles", e.to_string())),
    };
    let parsed: Vec<_> = raw.spectra.iter().map(|t| parse_spectrum(t)).collect();
    let nuclei: Vec<_> = parsed.iter().flatten().map(|s| s.nucleus).collect();
    let v = check_structure(&mol, &nuclei);
    if !v.passed {
        reject!(v);
    }
    verdicts.push(v);

    if parsed.is_empty() {
        reject!(Verdict::fail("nmr_validity", "no_spectra", "entry has no spectrum"));
    }
    let mut spectra: Vec<Spectrum> = Vec::with_capacity(parsed.len());
    for (i, p) in parsed.into_iter().enumerate() {
        let spec = match p {
            Ok(s) => s,
            Err(e) => {
                reject!(Verdict::fail("nmr_validity", "parse_error", e.to_string()).for_spectrum(i))
            }
        };
        if spec.partial {
            reject!(Verdict::fail(
                "nmr_validity",
                "partial_spectrum",
                "unparseable text after the last peak"
            )
            .for_spectrum(i));
        }
        let v = check_nmr_validity(&spec, cfg).for_spectrum(i);
        if !v.passed {
            reject!(v);
        }
        verdicts.push(v);
        spectra.push(spec);
    }

    let mut targets = Vec::with_capacity(spectra.len());
    for (i, spec) in spectra.iter().enumerate() {
        match check_consistency(&mol, spec, cfg) {
            Ok((v, t)) => {
                let v = v.for_spectrum(i);
                if !v.passed {
                    reject!(v);
                }
                verdicts.push(v);
                targets.extend(t);
            }
            Err(e @ ConsistencyError::MissingIntegration { peak }) => reject!(Verdict::fail(
                "consistency",
                "missing_integration",
                e.to_string()
            )
            .for_spectrum(i)
            .at_peak(peak)),
        }
    }

    let labeled = !targets.is_empty() && targets.iter().all(|t| t.is_labeled());
    let entry = DatasetEntry {
        id: raw.id.clone(),
        smiles: raw.smiles.clone(),
        molecule: mol,
        spectra,
        targets,
        labeled,
        verdicts: verdicts.clone(),
        provenance: raw.provenance.clone(),
    };
    Processed {
        verdicts,
        entry: Some(entry),
    }
}

/// Structure checks, then NMR validity, then consistency, stopping at the
/// first failure of each entry. Entries are processed in parallel; the
/// output follows input order.
pub fn run_pipeline(entries: &[RawEntry], cfg: &ValidityConfig) -> CurationOutput {
    let processed: Vec<Processed> = entries.par_iter().map(|e| process(e, cfg)).collect();
    let mut report = CurationReport {
        total: entries.len(),
        ..CurationReport::default()
    };
    let mut accepted = Vec::new();
    for (raw, p) in entries.iter().zip(processed) {
        let mut reached = BTreeMap::new();
        for v in &p.verdicts {
            let ok = reached.entry(v.check.clone()).or_insert(true);
            *ok &= v.passed;
        }
        for (stage, ok) in reached {
            let c = report
                .stages
                .get_mut(stage.as_str())
                .expect("known stage");
            c.checked += 1;
            if ok {
                c.passed += 1;
            } else {
                c.failed += 1;
            }
        }
        match p.entry {
            Some(e) => {
                report.accepted += 1;
                report.labeled += usize::from(e.labeled);
                accepted.push(e);
            }
            None => {
                let v = p.verdicts.last().expect("rejections carry a verdict");
                let rule = v.rule.clone().unwrap_or_default();
                report.rejected += 1;
                *report.rules.entry(rule.clone()).or_default() += 1;
                report.rejections.push(Rejection {
                    id: raw.id.clone(),
                    provenance: raw.provenance.clone(),
                    stage: v.check.clone(),
                    rule,
                    spectrum: v.spectrum,
                    peak: v.peak,
                    detail: v.detail.clone(),
                });
            }
        }
    }
    CurationOutput { accepted, report }
}

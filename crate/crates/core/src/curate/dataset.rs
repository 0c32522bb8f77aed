use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DatasetEntry;

pub const SCHEMA: &str = "shiftlit.dataset";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("missing or unsupported header: {0}")]
    BadHeader(String),
}

/// Header line, then one entry per line.
pub fn write_dataset<W: Write>(mut w: W, entries: &[DatasetEntry]) -> std::io::Result<()> {
    let header = Header {
        schema: SCHEMA.into(),
        version: VERSION,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut entries = Vec::new();
    let mut seen_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            let h: Header = serde_json::from_str(&line)
                .map_err(|_| DatasetError::BadHeader(line.chars().take(80).collect()))?;
            if h.schema != SCHEMA || h.version != VERSION {
                return Err(DatasetError::BadHeader(format!("{} v{}", h.schema, h.version)));
            }
            seen_header = true;
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            line: i + 1,
            source,
        })?;
        entries.push(e);
    }
    if !seen_header {
        return Err(DatasetError::BadHeader("empty file".into()));
    }
    Ok(entries)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NucleusStats {
    pub entries: usize,
    pub labeled_entries: usize,
    pub target_atoms: usize,
    pub min_shift: Option<f64>,
    pub max_shift: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub entries: usize,
    pub accepted: usize,
    pub labeled: usize,
    pub unique_smiles: usize,
    pub by_nucleus: BTreeMap<String, NucleusStats>,
    pub by_solvent: BTreeMap<String, usize>,
}

pub fn dataset_stats(entries: &[DatasetEntry]) -> DatasetStats {
    let mut s = DatasetStats {
        entries: entries.len(),
        ..Default::default()
    };
    let mut smiles = std::collections::BTreeSet::new();
    for e in entries {
        smiles.insert(crate::chemgraph::canonical_smiles(&e.molecule));
        if e.accepted() {
            s.accepted += 1;
        }
        if e.labeled {
            s.labeled += 1;
        }
        for t in &e.targets {
            let n = s.by_nucleus.entry(t.nucleus.to_string()).or_default();
            n.entries += 1;
            n.labeled_entries += usize::from(t.is_labeled());
            n.target_atoms += t.len();
            if let (Some(&lo), Some(&hi)) = (t.shifts.first(), t.shifts.last()) {
                n.min_shift = Some(n.min_shift.map_or(lo, |m| m.min(lo)));
                n.max_shift = Some(n.max_shift.map_or(hi, |m| m.max(hi)));
            }
            *s.by_solvent
                .entry(t.solvent_class.as_str().to_string())
                .or_default() += 1;
        }
    }
    s.unique_smiles = smiles.len();
    s
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specparse::Nucleus;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Either,
    Ascending,
    Descending,
}

/// Thresholds for the NMR validity and consistency stages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityConfig {
    pub shift_range: BTreeMap<Nucleus, (f64, f64)>,
    pub max_peak_width: BTreeMap<Nucleus, f64>,
    pub monotonic_direction: Direction,
    /// Accept unequal carbon class sizes and exchangeable-proton deficits.
    pub lenient: bool,
}

/// Valid chemical shift windows in ppm, inclusive.
pub const DEFAULT_RANGES: [(Nucleus, f64, f64); 6] = [
    (Nucleus::H1, -1.0, 15.0),
    (Nucleus::C13, -10.0, 230.0),
    (Nucleus::F19, -300.0, 300.0),
    (Nucleus::P31, -150.0, 200.0),
    (Nucleus::B11, -50.0, 100.0),
    (Nucleus::Si29, -70.0, 40.0),
];

impl Default for ValidityConfig {
    fn default() -> Self {
        ValidityConfig {
            shift_range: DEFAULT_RANGES
                .iter()
                .map(|&(n, lo, hi)| (n, (lo, hi)))
                .collect(),
            max_peak_width: Nucleus::ALL
                .iter()
                .map(|&n| {
                    let w = match n {
                        Nucleus::H1 => 0.5,
                        Nucleus::C13 => 2.0,
                        _ => 5.0,
                    };
                    (n, w)
                })
                .collect(),
            monotonic_direction: Direction::Either,
            lenient: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown nucleus {0:?}")]
    UnknownNucleus(String),
    #[error("range for {0} has lo > hi")]
    InvertedRange(Nucleus),
}

/// On-disk form: every field optional, nucleus maps merge over defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    shift_range: Option<BTreeMap<String, [f64; 2]>>,
    max_peak_width: Option<BTreeMap<String, f64>>,
    monotonic_direction: Option<Direction>,
    lenient: Option<bool>,
}

impl ValidityConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        let mut cfg = ValidityConfig::default();
        for (k, [lo, hi]) in file.shift_range.unwrap_or_default() {
            let n: Nucleus = k.parse().map_err(|_| ConfigError::UnknownNucleus(k))?;
            if lo > hi {
                return Err(ConfigError::InvertedRange(n));
            }
            cfg.shift_range.insert(n, (lo, hi));
        }
        for (k, w) in file.max_peak_width.unwrap_or_default() {
            let n: Nucleus = k.parse().map_err(|_| ConfigError::UnknownNucleus(k))?;
            cfg.max_peak_width.insert(n, w);
        }
        if let Some(d) = file.monotonic_direction {
            cfg.monotonic_direction = d;
        }
        if let Some(l) = file.lenient {
            cfg.lenient = l;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn range(&self, n: Nucleus) -> (f64, f64) {
        self.shift_range[&n]
    }

    pub fn width(&self, n: Nucleus) -> f64 {
        self.max_peak_width[&n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ValidityConfig::default();
        assert_eq!(c.range(Nucleus::C13), (-10.0, 230.0));
        assert_eq!(c.range(Nucleus::Si29), (-70.0, 40.0));
        assert_eq!(c.width(Nucleus::H1), 0.5);
        assert_eq!(c.width(Nucleus::B11), 5.0);
        assert!(!c.lenient);
    }

    #[test]
    fn partial_override() {
        let c = ValidityConfig::from_toml(
            "lenient = true\nmonotonic_direction = \"descending\"\n[shift_range]\n\"1H\" = [-2.0, 16.0]\n",
        )
        .unwrap();
        assert_eq!(c.range(Nucleus::H1), (-2.0, 16.0));
        assert_eq!(c.range(Nucleus::C13), (-10.0, 230.0));
        assert_eq!(c.monotonic_direction, Direction::Descending);
        assert!(c.lenient);
        assert_eq!(ValidityConfig::from_toml("").unwrap(), ValidityConfig::default());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            ValidityConfig::from_toml("[shift_range]\n\"15N\" = [0.0, 1.0]"),
            Err(ConfigError::UnknownNucleus(_))
        ));
        assert!(matches!(
            ValidityConfig::from_toml("[shift_range]\n\"13C\" = [5.0, 1.0]"),
            Err(ConfigError::InvertedRange(Nucleus::C13))
        ));
        assert!(ValidityConfig::from_toml("bogus = 1").is_err());
    }
}

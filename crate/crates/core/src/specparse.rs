//! Literature-style NMR peak lists.
//!
//! Accepted shape:
//!
//! ```text
//! <nucleus> NMR (<freq> MHz, <solvent>) δ <peak>, <peak>, ...
//! ```
//!
//! where a peak is `<shift>` or `<lo>–<hi>`, optionally followed by a
//! parenthesised annotation such as `(dd, J = 8.0, 2.1 Hz, 1H)` whose
//! components may appear in any order. The conditions block may list
//! solvent and frequency in either order (temperatures are skipped) or be
//! absent; `δ`, `delta`, `(ppm)`, `:` and `=` markers are all optional.
//! Decimal commas are accepted in shifts, J values and the frequency.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemgraph::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Nucleus {
    #[serde(rename = "1H")]
    H1,
    #[serde(rename = "13C")]
    C13,
    #[serde(rename = "19F")]
    F19,
    #[serde(rename = "31P")]
    P31,
    #[serde(rename = "11B")]
    B11,
    #[serde(rename = "29Si")]
    Si29,
}

impl Nucleus {
    pub const ALL: [Nucleus; 6] = [
        Nucleus::H1,
        Nucleus::C13,
        Nucleus::F19,
        Nucleus::P31,
        Nucleus::B11,
        Nucleus::Si29,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Nucleus::H1 => "1H",
            Nucleus::C13 => "13C",
            Nucleus::F19 => "19F",
            Nucleus::P31 => "31P",
            Nucleus::B11 => "11B",
            Nucleus::Si29 => "29Si",
        }
    }

    pub fn element(self) -> Element {
        match self {
            Nucleus::H1 => Element::H,
            Nucleus::C13 => Element::C,
            Nucleus::F19 => Element::F,
            Nucleus::P31 => Element::P,
            Nucleus::B11 => Element::B,
            Nucleus::Si29 => Element::Si,
        }
    }

    /// ¹⁹F, ³¹P, ¹¹B and ²⁹Si.
    pub fn is_heteroatom(self) -> bool {
        !matches!(self, Nucleus::H1 | Nucleus::C13)
    }

    /// Normalizes spelling variants: `1H`, `¹H`, `1 H`, `proton`, `13c`, ...
    pub fn from_token(token: &str) -> Option<Nucleus> {
        let norm: String = token
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(superscript_digit)
            .collect::<String>()
            .to_lowercase();
        let nuc = match norm.as_str() {
            "1h" | "proton" => Nucleus::H1,
            "13c" | "carbon" => Nucleus::C13,
            "19f" => Nucleus::F19,
            "31p" => Nucleus::P31,
            "11b" => Nucleus::B11,
            "29si" => Nucleus::Si29,
            _ => return None,
        };
        Some(nuc)
    }
}

impl fmt::Display for Nucleus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Nucleus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Nucleus::from_token(s).ok_or_else(|| format!("unsupported nucleus {s:?}"))
    }
}

fn superscript_digit(c: char) -> char {
    match c {
        '⁰' => '0',
        '¹' => '1',
        '²' => '2',
        '³' => '3',
        '⁴' => '4',
        '⁵' => '5',
        '⁶' => '6',
        '⁷' => '7',
        '⁸' => '8',
        '⁹' => '9',
        _ => c,
    }
}

fn subscript_digit(c: char) -> char {
    match c {
        '₀'..='₉' => char::from(b'0' + (c as u32 - '₀' as u32) as u8),
        _ => c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    S,
    D,
    T,
    Q,
    Quint,
    M,
    Dd,
    Dt,
    Td,
    Br,
    Unknown,
}

impl Multiplicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Multiplicity::S => "s",
            Multiplicity::D => "d",
            Multiplicity::T => "t",
            Multiplicity::Q => "q",
            Multiplicity::Quint => "quint",
            Multiplicity::M => "m",
            Multiplicity::Dd => "dd",
            Multiplicity::Dt => "dt",
            Multiplicity::Td => "td",
            Multiplicity::Br => "br",
            Multiplicity::Unknown => "unknown",
        }
    }

    /// Recognized multiplet words. Other coupling patterns (`ddd`, `sept`,
    /// ...) map to `Unknown`; anything else is not a multiplicity.
    fn from_word(word: &str) -> Option<Multiplicity> {
        let w: String = word
            .to_lowercase()
            .chars()
            .filter(|c| *c != '.')
            .collect::<String>()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        let m = match w.as_str() {
            "s" | "singlet" => Multiplicity::S,
            "d" | "doublet" => Multiplicity::D,
            "t" | "triplet" => Multiplicity::T,
            "q" | "quartet" => Multiplicity::Q,
            "quint" | "quin" | "p" | "pent" | "quintet" | "pentet" => Multiplicity::Quint,
            "m" | "multiplet" => Multiplicity::M,
            "dd" => Multiplicity::Dd,
            "dt" => Multiplicity::Dt,
            "td" => Multiplicity::Td,
            "br" | "brs" | "bs" | "br s" | "broad" | "broad s" | "br singlet" => Multiplicity::Br,
            _ if OTHER_MULTIPLET.is_match(&w) => Multiplicity::Unknown,
            _ => return None,
        };
        Some(m)
    }
}

static OTHER_MULTIPLET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:[dtq]{2,4}|sext(?:et)?|sept(?:et)?|hept(?:et)?|dquint|tquint|br [dtqm]|br[dtqm]|br m|brm)$")
        .unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolventClass {
    CDCl3,
    #[serde(rename = "DMSO-d6")]
    DmsoD6,
    Other,
    Unspecified,
}

impl SolventClass {
    /// The three classes a model is conditioned on; `Unspecified` folds into
    /// `Other`.
    pub const TRAINING: [SolventClass; 3] =
        [SolventClass::CDCl3, SolventClass::DmsoD6, SolventClass::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            SolventClass::CDCl3 => "CDCl3",
            SolventClass::DmsoD6 => "DMSO-d6",
            SolventClass::Other => "Other",
            SolventClass::Unspecified => "Unspecified",
        }
    }

    pub fn training_class(self) -> SolventClass {
        match self {
            SolventClass::Unspecified => SolventClass::Other,
            c => c,
        }
    }

    /// Row of the solvent tables in a model (0, 1 or 2).
    pub fn index(self) -> usize {
        match self.training_class() {
            SolventClass::CDCl3 => 0,
            SolventClass::DmsoD6 => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for SolventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolventClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CDCl3" => Ok(SolventClass::CDCl3),
            "DMSO-d6" | "DMSO" => Ok(SolventClass::DmsoD6),
            "Other" => Ok(SolventClass::Other),
            "Unspecified" => Ok(SolventClass::Unspecified),
            _ => Err(format!("unknown solvent class {s:?}")),
        }
    }
}

/// Normalized spellings (see [`solvent_key`]) of each named class.
pub const CDCL3_ALIASES: &[&str] = &[
    "cdcl3",
    "chloroformd",
    "chloroformd1",
    "deuterochloroform",
    "deuteratedchloroform",
];

pub const DMSO_ALIASES: &[&str] = &[
    "dmsod6",
    "d6dmso",
    "dmso",
    "cd32so",
    "dimethylsulfoxided6",
    "dimethylsulphoxided6",
    "hexadeuterodimethylsulfoxide",
];

/// Lowercase ASCII letters and digits of a solvent name, with subscript
/// digits folded to plain ones.
pub fn solvent_key(solvent_raw: &str) -> String {
    solvent_raw
        .to_lowercase()
        .chars()
        .map(subscript_digit)
        .filter(|c| c.is_ascii_alphanumeric())
        .collect()
}

pub fn classify_solvent(solvent_raw: &str) -> SolventClass {
    let key = solvent_key(solvent_raw);
    if solvent_raw.trim().is_empty() {
        SolventClass::Unspecified
    } else if CDCL3_ALIASES.contains(&key.as_str()) {
        SolventClass::CDCl3
    } else if DMSO_ALIASES.contains(&key.as_str()) {
        SolventClass::DmsoD6
    } else {
        SolventClass::Other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub shift_low: f64,
    pub shift_high: f64,
    pub multiplicity: Multiplicity,
    pub integration: Option<u32>,
    pub j_values: Vec<f64>,
}

impl Peak {
    pub fn point(shift: f64) -> Peak {
        Peak {
            shift_low: shift,
            shift_high: shift,
            multiplicity: Multiplicity::Unknown,
            integration: None,
            j_values: Vec::new(),
        }
    }

    pub fn width(&self) -> f64 {
        self.shift_high - self.shift_low
    }
}

/// Representative shift of a peak: the midpoint of its range.
pub fn peak_shift(p: &Peak) -> f64 {
    (p.shift_low + p.shift_high) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub nucleus: Nucleus,
    pub frequency_mhz: Option<f64>,
    pub solvent_raw: String,
    pub solvent_class: SolventClass,
    pub peaks: Vec<Peak>,
    /// Set when an unparseable fragment followed the last valid peak.
    #[serde(default)]
    pub partial: bool,
}

impl Spectrum {
    pub fn shifts(&self) -> Vec<f64> {
        self.peaks.iter().map(peak_shift).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("no supported nucleus found at byte {offset}: {text:?}")]
    NoNucleusFound { offset: usize, text: String },
    #[error("no peaks found at byte {offset}: {text:?}")]
    NoPeaksFound { offset: usize, text: String },
    #[error("malformed peak at byte {offset}: {text:?}")]
    MalformedPeak { offset: usize, text: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::NoNucleusFound { offset, .. }
            | ParseError::NoPeaksFound { offset, .. }
            | ParseError::MalformedPeak { offset, .. } => *offset,
        }
    }
}

/// One output line of the `parse` command and of the golden corpus:
/// the spectrum itself, or `{"error": {...}}`.
pub fn outcome_json(result: &Result<Spectrum, ParseError>) -> serde_json::Value {
    match result {
        Ok(spec) => serde_json::to_value(spec).expect("spectrum serializes"),
        Err(e) => serde_json::json!({ "error": e }),
    }
}

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?P<nuc>[0-9]{1,2}\s?[a-z]{1,2}|[¹²³⁴⁵⁶⁷⁸⁹⁰]+\s?[a-z]{1,2}|proton|carbon)\s*(?:\{[^}]*\})?\s*-?\s*NMR\b",
    )
    .unwrap()
});

static FREQUENCY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^([0-9]+(?:[.,][0-9]+)?)\s*MHz$").unwrap());

static TEMPERATURE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:[-−]?[0-9]+(?:[.,][0-9]+)?\s*(?:K|°\s*C|℃)|rt|r\.t\.|room temp(?:erature)?)$")
        .unwrap()
});

const NUM: &str = r"[-−]?(?:[0-9]+(?:\.[0-9]+)?|\.[0-9]+)";

static PEAK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?P<lo>{NUM})(?:\s*(?:-|–|—|−|~|to)\s*(?P<hi>{NUM}))?\s*(?:ppm)?\s*(?:\((?P<ann>.*)\))?$"
    ))
    .unwrap()
});

static J_CLAUSE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[0-9]?J[A-Za-z0-9_\-]*\s*[=:]?\s*(?P<rest>[-−.0-9].*)$").unwrap()
});

static BARE_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^{NUM}\s*(?:Hz)?$")).unwrap());

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(NUM).unwrap());

static INTEGRATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([1-9][0-9]*)\s*H$").unwrap());

fn parse_num(s: &str) -> f64 {
    s.replace('−', "-").parse().expect("regex-validated number")
}

/// Replaces commas that sit between digits of a number without a decimal
/// point by points. Byte length is preserved so offsets stay valid.
fn normalize_decimal_commas(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = b.to_vec();
    for i in 1..b.len().saturating_sub(1) {
        if b[i] != b',' || !b[i - 1].is_ascii_digit() || !b[i + 1].is_ascii_digit() {
            continue;
        }
        let mut k = i;
        while k > 0 && (out[k - 1].is_ascii_digit() || out[k - 1] == b'.') {
            k -= 1;
        }
        if !out[k..i].contains(&b'.') {
            out[i] = b'.';
        }
    }
    String::from_utf8(out).expect("ascii substitution keeps utf-8")
}

/// Splits on `,`/`;` outside parentheses and brackets. Commas that
/// `normalize_decimal_commas` would convert are not separators.
fn split_top_level(s: &str, base: usize) -> Vec<(usize, &str)> {
    let decimal = normalize_decimal_commas(s);
    let db = decimal.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, &c) in s.as_bytes().iter().enumerate() {
        match c {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b',' | b';' if depth <= 0 && db[i] != b'.' => {
                parts.push((base + start, &s[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push((base + start, &s[start..]));
    parts
}

pub fn parse_spectrum(text: &str) -> Result<Spectrum, ParseError> {
    let header = HEADER.captures(text).ok_or_else(|| ParseError::NoNucleusFound {
        offset: 0,
        text: truncate(text.trim(), 40).to_string(),
    })?;
    let nuc_match = header.name("nuc").unwrap();
    let nucleus =
        Nucleus::from_token(nuc_match.as_str()).ok_or_else(|| ParseError::NoNucleusFound {
            offset: nuc_match.start(),
            text: nuc_match.as_str().to_string(),
        })?;

    let mut pos = header.get(0).unwrap().end();
    pos = skip_ws(text, pos);

    let mut frequency_mhz = None;
    let mut solvent_raw = String::new();
    let conditions = if text[pos..].starts_with('(') {
        let close = matching_paren(text, pos).ok_or_else(|| ParseError::NoPeaksFound {
            offset: pos,
            text: text[pos..].to_string(),
        })?;
        let inner = (pos + 1, &text[pos + 1..close]);
        pos = close + 1;
        Some(inner)
    } else if text[pos..].starts_with(',') {
        // "1H NMR, 400 MHz, CDCl3: δ ..."
        let rest = &text[pos + 1..];
        let end = rest
            .find([':', 'δ'])
            .unwrap_or(rest.len());
        let inner = (pos + 1, &rest[..end]);
        pos += 1 + end;
        Some(inner)
    } else {
        None
    };
    if let Some((base, inner)) = conditions {
        for (_, part) in split_top_level(inner, base) {
            let part = part.trim();
            if let Some(c) = FREQUENCY.captures(part) {
                frequency_mhz = Some(c[1].replace(',', ".").parse::<f64>().unwrap());
            } else if TEMPERATURE.is_match(part) || part.is_empty() {
            } else if solvent_raw.is_empty() {
                solvent_raw = part.to_string();
            }
        }
    }

    pos = skip_markers(text, pos);

    let mut end = text.trim_end().len();
    while end > pos && matches!(text.as_bytes()[end - 1], b'.' | b';') {
        end = text[..end - 1].trim_end().len();
    }
    if end <= pos {
        return Err(ParseError::NoPeaksFound {
            offset: pos,
            text: String::new(),
        });
    }

    let section = normalize_decimal_commas(&text[pos..end]);
    let mut peaks = Vec::new();
    let mut partial = false;
    for (offset, piece) in split_top_level(&section, pos) {
        match parse_peak(piece.trim()) {
            Some(p) => peaks.push(p),
            None if peaks.is_empty() => {
                let lead = piece.len() - piece.trim_start().len();
                return Err(ParseError::MalformedPeak {
                    offset: offset + lead,
                    text: text[offset + lead..offset + piece.len()].trim_end().to_string(),
                });
            }
            None => {
                partial = true;
                break;
            }
        }
    }

    Ok(Spectrum {
        nucleus,
        frequency_mhz,
        solvent_class: classify_solvent(&solvent_raw),
        solvent_raw,
        peaks,
        partial,
    })
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn skip_ws(text: &str, pos: usize) -> usize {
    pos + (text[pos..].len() - text[pos..].trim_start().len())
}

fn matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Skips any run of `δ`, `δH`, `delta`, `(ppm)`, `ppm`, `:` and `=`.
fn skip_markers(text: &str, mut pos: usize) -> usize {
    loop {
        pos = skip_ws(text, pos);
        let rest = &text[pos..];
        let lower = rest.get(..5).map(str::to_ascii_lowercase);
        let step = if rest.starts_with(':') || rest.starts_with('=') || rest.starts_with(',') {
            1
        } else if let Some(r) = rest.strip_prefix('δ') {
            // subscripted nucleus letter, as in "δH" or "δC"
            let letter = r.chars().next().filter(|c| c.is_ascii_uppercase());
            let follows = r.chars().nth(1);
            'δ'.len_utf8()
                + match (letter, follows) {
                    (Some(_), Some(f)) if !f.is_ascii_alphabetic() => 1,
                    (Some(_), None) => 1,
                    _ => 0,
                }
        } else if lower.as_deref() == Some("delta") {
            5
        } else if rest.starts_with("(ppm)") {
            5
        } else if rest.get(..3).is_some_and(|s| s.eq_ignore_ascii_case("ppm")) {
            3
        } else {
            return pos;
        };
        pos += step;
    }
}

fn parse_peak(piece: &str) -> Option<Peak> {
    let c = PEAK.captures(piece)?;
    let lo = parse_num(&c["lo"]);
    let hi = c.name("hi").map_or(lo, |m| parse_num(m.as_str()));
    let mut peak = Peak::point(lo.min(hi));
    peak.shift_high = lo.max(hi);
    if let Some(ann) = c.name("ann") {
        annotate(&mut peak, ann.as_str());
    }
    Some(peak)
}

fn annotate(peak: &mut Peak, ann: &str) {
    let mut mult: Option<Multiplicity> = None;
    let mut in_j = false;
    for (_, comp) in split_top_level(ann, 0) {
        let comp = comp.trim();
        if let Some(c) = J_CLAUSE.captures(comp) {
            let rest = &c["rest"];
            peak.j_values
                .extend(NUMBER.find_iter(rest).map(|m| parse_num(m.as_str())));
            in_j = !rest.contains("Hz");
            continue;
        }
        if in_j && BARE_NUMBER.is_match(comp) {
            peak.j_values.push(parse_num(NUMBER.find(comp).unwrap().as_str()));
            in_j = !comp.contains("Hz");
            continue;
        }
        in_j = false;
        if !label(comp, peak, &mut mult) {
            for word in comp.split_whitespace() {
                label(word, peak, &mut mult);
            }
        }
    }
    peak.multiplicity = mult.unwrap_or(Multiplicity::Unknown);
}

/// Integration or multiplicity; the first of each wins.
fn label(word: &str, peak: &mut Peak, mult: &mut Option<Multiplicity>) -> bool {
    if let Some(c) = INTEGRATION.captures(word) {
        if peak.integration.is_none() {
            peak.integration = c[1].parse().ok();
        }
        return true;
    }
    if let Some(m) = Multiplicity::from_word(word) {
        mult.get_or_insert(m);
        return true;
    }
    false
}

/// Canonical text for a spectrum; parsing it gives the spectrum back.
pub fn render(spec: &Spectrum) -> String {
    let mut out = format!("{} NMR", spec.nucleus);
    let mut conds = Vec::new();
    if let Some(f) = spec.frequency_mhz {
        conds.push(format!("{f} MHz"));
    }
    if !spec.solvent_raw.is_empty() {
        conds.push(spec.solvent_raw.clone());
    }
    if !conds.is_empty() {
        out.push_str(&format!(" ({})", conds.join(", ")));
    }
    out.push_str(" δ ");
    let peaks: Vec<String> = spec.peaks.iter().map(render_peak).collect();
    out.push_str(&peaks.join(", "));
    out
}

fn render_peak(p: &Peak) -> String {
    let mut s = if p.shift_low == p.shift_high {
        format!("{}", p.shift_low)
    } else {
        format!("{}–{}", p.shift_low, p.shift_high)
    };
    let mut ann = Vec::new();
    if p.multiplicity != Multiplicity::Unknown {
        ann.push(p.multiplicity.as_str().to_string());
    }
    if !p.j_values.is_empty() {
        let js: Vec<String> = p.j_values.iter().map(|j| j.to_string()).collect();
        ann.push(format!("J = {} Hz", js.join(", ")));
    }
    if let Some(n) = p.integration {
        ann.push(format!("{n}H"));
    }
    if !ann.is_empty() {
        s.push_str(&format!(" ({})", ann.join(", ")));
    }
    s
}

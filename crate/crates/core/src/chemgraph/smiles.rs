//! SMILES-subset parser.
//!
//! Supported: organic-subset atoms, aromatic lowercase atoms, bracket atoms
//! with isotope / H-count / charge / atom class, branches, ring closures
//! (`1`-`9`, `%nn`), bond symbols `- = # :` and dot-disconnected fragments.
//! Stereo markers (`/ \ @`) are accepted and dropped; the resulting
//! molecule records that it happened.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::element::Element;
use super::structure::perceive_aromaticity;
use super::{Atom, Bond, BondOrder, GraphError, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmilesError {
    #[error("empty SMILES string")]
    EmptyInput { offset: usize },
    #[error("unbalanced branch at byte {offset}")]
    UnbalancedBranch { offset: usize },
    #[error("ring bond {label} opened at byte {offset} is never closed")]
    UnclosedRing { offset: usize, label: u32 },
    #[error("unknown atom token {token:?} at byte {offset}")]
    UnknownAtomToken { offset: usize, token: String },
    #[error("invalid bond at byte {offset}: {reason}")]
    InvalidBond { offset: usize, reason: String },
}

impl SmilesError {
    pub fn offset(&self) -> usize {
        match self {
            SmilesError::EmptyInput { offset }
            | SmilesError::UnbalancedBranch { offset }
            | SmilesError::UnclosedRing { offset, .. }
            | SmilesError::UnknownAtomToken { offset, .. }
            | SmilesError::InvalidBond { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`: single bond with a stereo annotation we drop.
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Directional => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct PendingBond {
    a: usize,
    b: usize,
    sym: Option<BondSym>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bracket: Vec<bool>,
    bonds: Vec<PendingBond>,
    stereo: bool,
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let trimmed_start = text.len() - text.trim_start().len();
    let body = text.trim();
    if body.is_empty() {
        return Err(SmilesError::EmptyInput { offset: 0 });
    }
    let mut p = Parser {
        text: body,
        bytes: body.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bracket: Vec::new(),
        bonds: Vec::new(),
        stereo: false,
    };
    p.run().map_err(|e| shift_offset(e, trimmed_start))?;
    p.finish().map_err(|e| shift_offset(e, trimmed_start))
}

fn shift_offset(e: SmilesError, by: usize) -> SmilesError {
    if by == 0 {
        return e;
    }
    match e {
        SmilesError::EmptyInput { offset } => SmilesError::EmptyInput {
            offset: offset + by,
        },
        SmilesError::UnbalancedBranch { offset } => SmilesError::UnbalancedBranch {
            offset: offset + by,
        },
        SmilesError::UnclosedRing { offset, label } => SmilesError::UnclosedRing {
            offset: offset + by,
            label,
        },
        SmilesError::UnknownAtomToken { offset, token } => SmilesError::UnknownAtomToken {
            offset: offset + by,
            token,
        },
        SmilesError::InvalidBond { offset, reason } => SmilesError::InvalidBond {
            offset: offset + by,
            reason,
        },
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn unknown(&self, start: usize, end: usize) -> SmilesError {
        let end = end.min(self.text.len()).max(start + 1);
        // widen to a char boundary so the token is valid UTF-8
        let mut e = end;
        while e < self.text.len() && !self.text.is_char_boundary(e) {
            e += 1;
        }
        SmilesError::UnknownAtomToken {
            offset: start,
            token: self.text[start..e.min(self.text.len())].to_string(),
        }
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<Option<usize>> = Vec::new();
        let mut pending: Option<(BondSym, usize)> = None;
        // label -> (atom, bond symbol at opening, offset)
        let mut rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(SmilesError::UnbalancedBranch { offset: start });
                    }
                    branches.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            offset: start,
                            reason: "bond symbol before ')'".into(),
                        });
                    }
                    prev = branches
                        .pop()
                        .ok_or(SmilesError::UnbalancedBranch { offset: start })?;
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            offset: start,
                            reason: "bond symbol before '.'".into(),
                        });
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            offset: start,
                            reason: "two consecutive bond symbols".into(),
                        });
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        _ => {
                            self.stereo = true;
                            BondSym::Directional
                        }
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let label = self.ring_label()?;
                    let here = prev.ok_or_else(|| SmilesError::InvalidBond {
                        offset: start,
                        reason: "ring closure without a preceding atom".into(),
                    })?;
                    let sym = pending.take().map(|(s, _)| s);
                    match rings.remove(&label) {
                        Some((other, open_sym, _)) => {
                            let sym = match (open_sym, sym) {
                                (Some(a), Some(b)) if a.order() != b.order() => {
                                    return Err(SmilesError::InvalidBond {
                                        offset: start,
                                        reason: format!("conflicting bond orders on ring {label}"),
                                    })
                                }
                                (a, b) => a.or(b),
                            };
                            self.bonds.push(PendingBond {
                                a: other,
                                b: here,
                                sym,
                                offset: start,
                            });
                        }
                        None => {
                            rings.insert(label, (here, sym, start));
                        }
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    let idx = self.push_atom(atom, true);
                    self.connect(&mut prev, &mut pending, idx, start)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    let idx = self.push_atom(atom, false);
                    self.connect(&mut prev, &mut pending, idx, start)?;
                }
            }
        }

        if !branches.is_empty() {
            return Err(SmilesError::UnbalancedBranch {
                offset: self.bytes.len(),
            });
        }
        if let Some((&label, &(_, _, offset))) = rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(SmilesError::UnclosedRing { offset, label });
        }
        if let Some((_, offset)) = pending {
            return Err(SmilesError::InvalidBond {
                offset,
                reason: "dangling bond symbol".into(),
            });
        }
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom, bracket: bool) -> usize {
        self.atoms.push(atom);
        self.bracket.push(bracket);
        self.atoms.len() - 1
    }

    fn connect(
        &mut self,
        prev: &mut Option<usize>,
        pending: &mut Option<(BondSym, usize)>,
        idx: usize,
        offset: usize,
    ) -> Result<(), SmilesError> {
        match (*prev, pending.take()) {
            (Some(p), sym) => self.bonds.push(PendingBond {
                a: p,
                b: idx,
                sym: sym.map(|(s, _)| s),
                offset,
            }),
            (None, Some((_, at))) => {
                return Err(SmilesError::InvalidBond {
                    offset: at,
                    reason: "bond symbol without a preceding atom".into(),
                })
            }
            (None, None) => {}
        }
        *prev = Some(idx);
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, SmilesError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.bytes.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(SmilesError::InvalidBond {
                    offset: start,
                    reason: "'%' must be followed by two digits".into(),
                }),
            }
        } else {
            self.pos += 1;
            Ok((self.bytes[start] - b'0') as u32)
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.bytes[start];
        let two = self.bytes.get(start..start + 2);
        let (element, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => (Element::Cl, false, 2),
            (b'B', Some(b"Br")) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ => {
                let ch_len = self.text[start..].chars().next().map_or(1, char::len_utf8);
                return Err(self.unknown(start, start + ch_len));
            }
        };
        self.pos += len;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let close = match self.text[start..].find(']') {
            Some(k) => start + k,
            None => return Err(self.unknown(start, self.bytes.len())),
        };
        let inner = &self.bytes[start + 1..close];
        let bad_token = self.unknown(start, close + 1);
        let bad = || bad_token.clone();
        let mut k = 0;

        let mut isotope: Option<u16> = None;
        while k < inner.len() && inner[k].is_ascii_digit() {
            let v = isotope.unwrap_or(0) as u32 * 10 + (inner[k] - b'0') as u32;
            isotope = Some(u16::try_from(v).map_err(|_| bad())?);
            k += 1;
        }

        let (element, aromatic) = {
            let rest = &inner[k..];
            let first = *rest.first().ok_or_else(bad)?;
            if first.is_ascii_uppercase() {
                let two = rest
                    .get(..2)
                    .filter(|t| t[1].is_ascii_lowercase())
                    .and_then(|t| std::str::from_utf8(t).ok())
                    .and_then(|s| s.parse::<Element>().ok());
                match two {
                    Some(e) => {
                        k += 2;
                        (e, false)
                    }
                    None => {
                        let one = std::str::from_utf8(&rest[..1])
                            .ok()
                            .and_then(|s| s.parse::<Element>().ok())
                            .ok_or_else(bad)?;
                        k += 1;
                        (one, false)
                    }
                }
            } else if first.is_ascii_lowercase() {
                let e = match rest.get(..2) {
                    Some(b"se") => Some((Element::Se, 2)),
                    Some(b"as") => Some((Element::As, 2)),
                    _ => None,
                }
                .or(match first {
                    b'b' => Some((Element::B, 1)),
                    b'c' => Some((Element::C, 1)),
                    b'n' => Some((Element::N, 1)),
                    b'o' => Some((Element::O, 1)),
                    b'p' => Some((Element::P, 1)),
                    b's' => Some((Element::S, 1)),
                    _ => None,
                })
                .ok_or_else(bad)?;
                k += e.1;
                (e.0, true)
            } else {
                return Err(bad());
            }
        };

        // chirality: @, @@, @TH1, @SP2, ...
        if inner.get(k) == Some(&b'@') {
            self.stereo = true;
            while inner.get(k) == Some(&b'@') {
                k += 1;
            }
            while k < inner.len() && inner[k].is_ascii_uppercase() && inner[k] != b'H' {
                k += 1;
            }
            while k < inner.len() && inner[k].is_ascii_digit() {
                k += 1;
            }
        }

        let mut explicit_h = 0u8;
        if inner.get(k) == Some(&b'H') {
            k += 1;
            explicit_h = 1;
            if k < inner.len() && inner[k].is_ascii_digit() {
                explicit_h = inner[k] - b'0';
                k += 1;
            }
        }

        let mut charge: i8 = 0;
        if let Some(&sign @ (b'+' | b'-')) = inner.get(k) {
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            k += 1;
            if k < inner.len() && inner[k].is_ascii_digit() {
                let mut mag = 0i8;
                while k < inner.len() && inner[k].is_ascii_digit() {
                    mag = mag
                        .checked_mul(10)
                        .and_then(|m| m.checked_add((inner[k] - b'0') as i8))
                        .ok_or_else(bad)?;
                    k += 1;
                }
                charge = unit * mag;
            } else {
                charge = unit;
                while inner.get(k) == Some(&sign) {
                    charge += unit;
                    k += 1;
                }
            }
        }

        if inner.get(k) == Some(&b':') {
            k += 1;
            let digits_start = k;
            while k < inner.len() && inner[k].is_ascii_digit() {
                k += 1;
            }
            if k == digits_start {
                return Err(bad());
            }
        }

        if k != inner.len() {
            return Err(bad());
        }
        if aromatic && !element.can_be_aromatic() {
            return Err(bad());
        }

        self.pos = close + 1;
        Ok(Atom {
            element,
            formal_charge: charge,
            explicit_h: Some(explicit_h),
            implicit_h: explicit_h,
            aromatic,
            isotope_label: isotope,
        })
    }

    fn finish(self) -> Result<Molecule, SmilesError> {
        let mut bonds = Vec::with_capacity(self.bonds.len());
        for pb in &self.bonds {
            let order = match pb.sym {
                Some(s) => s.order(),
                None if self.atoms[pb.a].aromatic && self.atoms[pb.b].aromatic => {
                    BondOrder::Aromatic
                }
                None => BondOrder::Single,
            };
            bonds.push(Bond {
                a: pb.a,
                b: pb.b,
                order,
            });
        }
        let offsets: Vec<usize> = self.bonds.iter().map(|b| b.offset).collect();
        let mut atoms = self.atoms;
        let mut mol = Molecule::new(atoms.clone(), bonds.clone()).map_err(|e| {
            let (k, reason) = match e {
                GraphError::DanglingBond(k, _) => (k, "dangling bond"),
                GraphError::SelfBond(k, _) => (k, "atom bonded to itself"),
                GraphError::DuplicateBond(a, b) => (
                    bonds
                        .iter()
                        .rposition(|x| (x.a, x.b) == (a, b) || (x.a, x.b) == (b, a))
                        .unwrap_or(0),
                    "duplicate bond",
                ),
            };
            SmilesError::InvalidBond {
                offset: offsets.get(k).copied().unwrap_or(0),
                reason: reason.into(),
            }
        })?;

        for i in 0..atoms.len() {
            if !self.bracket[i] {
                atoms[i].implicit_h = default_implicit_h(&mol, i);
            }
        }
        mol = Molecule::new(atoms, bonds).expect("validated above");
        Ok(perceive_aromaticity(mol).with_stereo_flag(self.stereo))
    }
}

/// Implicit hydrogen count of an unbracketed organic-subset atom.
///
/// Aromatic B/C/N/P reserve one valence unit for the delocalized system;
/// aromatic O/S donate a lone pair and reserve nothing.
pub(crate) fn default_implicit_h(mol: &Molecule, i: usize) -> u8 {
    let atom = mol.atom(i);
    let bond_sum: u32 = mol
        .neighbors(i)
        .iter()
        .map(|&(_, o)| o.base_valence() as u32)
        .sum();
    let reserve = match (atom.aromatic, atom.element) {
        (true, Element::B | Element::C | Element::N | Element::P) => 1,
        _ => 0,
    };
    let needed = bond_sum + reserve;
    atom.element
        .neutral_valences()
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= needed)
        .map_or(0, |v| (v - needed) as u8)
}

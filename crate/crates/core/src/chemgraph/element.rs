use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Elements the parser understands. Anything else is an unknown atom token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    H,
    Li,
    B,
    C,
    N,
    O,
    F,
    Na,
    Mg,
    Al,
    Si,
    P,
    S,
    Cl,
    K,
    Ca,
    Ge,
    As,
    Se,
    Br,
    Sn,
    Te,
    I,
}

impl Element {
    pub const ALL: [Element; 23] = [
        Element::H,
        Element::Li,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Na,
        Element::Mg,
        Element::Al,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::K,
        Element::Ca,
        Element::Ge,
        Element::As,
        Element::Se,
        Element::Br,
        Element::Sn,
        Element::Te,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::Li => "Li",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Na => "Na",
            Element::Mg => "Mg",
            Element::Al => "Al",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::K => "K",
            Element::Ca => "Ca",
            Element::Ge => "Ge",
            Element::As => "As",
            Element::Se => "Se",
            Element::Br => "Br",
            Element::Sn => "Sn",
            Element::Te => "Te",
            Element::I => "I",
        }
    }

    /// Organic-subset elements may appear outside brackets.
    pub fn is_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// Elements allowed to be written in lowercase (aromatic) form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::Se
                | Element::As
        )
    }

    /// Standard valences of the neutral element, lowest first.
    /// Empty for elements without a meaningful covalent valence model (metals).
    pub fn neutral_valences(self) -> &'static [u8] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C | Element::Si | Element::Ge | Element::Sn => &[4],
            Element::N | Element::As => &[3, 5],
            Element::P => &[3, 5],
            Element::O => &[2],
            Element::S | Element::Se | Element::Te => &[2, 4, 6],
            Element::F => &[1],
            Element::Cl | Element::Br | Element::I => &[1, 3, 5, 7],
            Element::Li | Element::Na | Element::K | Element::Mg | Element::Ca | Element::Al => &[],
        }
    }

    /// Allowed total valences for a given formal charge.
    ///
    /// Group 15-17 atoms gain one bond per positive charge and lose one per
    /// negative charge (N+ is tetravalent, O- monovalent). Group 14 atoms lose
    /// one bond per unit of charge in either direction. Boron behaves like
    /// carbon when negatively charged.
    pub fn valences(self, charge: i8) -> Vec<u8> {
        let base = self.neutral_valences();
        if charge == 0 || base.is_empty() {
            return base.to_vec();
        }
        let q = charge as i16;
        let shifted: Vec<i16> = match self {
            Element::H => vec![1 - q.abs()],
            Element::C | Element::Si | Element::Ge | Element::Sn => vec![4 - q.abs()],
            Element::B => vec![3 - q],
            _ => base.iter().map(|&v| v as i16 + q).collect(),
        };
        shifted
            .into_iter()
            .filter(|&v| v >= 0)
            .map(|v| v as u8)
            .collect()
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or(())
    }
}

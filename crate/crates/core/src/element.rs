//! Periodic table lookups needed by the graph and valence model.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Pauling electronegativities for the elements the heuristics care about.
/// Anything missing falls back to 1.5.
const ELECTRONEGATIVITY: [(u8, f64); 26] = [
    (1, 2.20),
    (3, 0.98),
    (5, 2.04),
    (6, 2.55),
    (7, 3.04),
    (8, 3.44),
    (9, 3.98),
    (11, 0.93),
    (12, 1.31),
    (13, 1.61),
    (14, 1.90),
    (15, 2.19),
    (16, 2.58),
    (17, 3.16),
    (19, 0.82),
    (20, 1.00),
    (26, 1.83),
    (28, 1.91),
    (29, 1.90),
    (30, 1.65),
    (34, 2.55),
    (35, 2.96),
    (46, 2.20),
    (50, 1.96),
    (53, 2.66),
    (78, 2.28),
];

/// A chemical element, stored as its atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const PD: Element = Element(46);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|s| *s == symbol)
            .map(|idx| Element(idx as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    pub fn is_hydrogen(self) -> bool {
        self.0 == 1
    }

    pub fn period(self) -> u8 {
        match self.0 {
            1..=2 => 1,
            3..=10 => 2,
            11..=18 => 3,
            19..=36 => 4,
            37..=54 => 5,
            55..=86 => 6,
            _ => 7,
        }
    }

    /// IUPAC group (1-18); `None` for lanthanides and actinides.
    pub fn group(self) -> Option<u8> {
        let z = self.0;
        let g = match z {
            1 => 1,
            2 => 18,
            3..=10 => {
                if z <= 4 {
                    z - 2
                } else {
                    z + 8
                }
            }
            11..=18 => {
                if z <= 12 {
                    z - 10
                } else {
                    z
                }
            }
            19..=36 => z - 18,
            37..=54 => z - 36,
            55 | 56 => z - 54,
            57..=71 => return None,
            72..=86 => z - 68,
            87 | 88 => z - 86,
            89..=103 => return None,
            _ => z - 100,
        };
        Some(g)
    }

    /// d- and f-block elements. These are exempt from octet bookkeeping.
    pub fn is_transition_metal(self) -> bool {
        matches!(self.group(), None | Some(3..=12))
    }

    /// Valence electron count for main-group elements.
    pub fn valence_electrons(self) -> Option<u8> {
        match self.group()? {
            g @ 1..=2 => Some(g),
            3..=12 => None,
            g => Some(g - 10),
        }
    }

    /// Maximum number of electrons the valence shell holds without expansion.
    pub fn shell_capacity(self) -> Option<u8> {
        match self.period() {
            1 => Some(2),
            2 => Some(8),
            _ => None,
        }
    }

    pub fn electronegativity(self) -> f64 {
        ELECTRONEGATIVITY
            .iter()
            .find(|(z, _)| *z == self.0)
            .map(|(_, en)| *en)
            .unwrap_or(1.5)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let symbol = String::deserialize(deserializer)?;
        Element::from_symbol(&symbol)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown element symbol `{symbol}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for z in 1..=118u8 {
            let el = Element::from_atomic_number(z).unwrap();
            assert_eq!(Element::from_symbol(el.symbol()), Some(el));
        }
        assert_eq!(Element::from_symbol("Xx"), None);
    }

    #[test]
    fn groups_and_valence_electrons() {
        let v = |s: &str| Element::from_symbol(s).unwrap().valence_electrons();
        assert_eq!(v("H"), Some(1));
        assert_eq!(v("B"), Some(3));
        assert_eq!(v("C"), Some(4));
        assert_eq!(v("O"), Some(6));
        assert_eq!(v("Cl"), Some(7));
        assert_eq!(v("Br"), Some(7));
        assert_eq!(v("I"), Some(7));
        assert_eq!(v("Na"), Some(1));
        assert_eq!(v("Pd"), None);
        assert!(Element::PD.is_transition_metal());
        assert!(Element::from_symbol("Ce").unwrap().is_transition_metal());
        assert!(!Element::S.is_transition_metal());
    }
}

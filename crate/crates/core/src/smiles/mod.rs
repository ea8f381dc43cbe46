//! SMILES reader and canonical writer for the subset used by mechanism
//! corpora: organic-subset and bracket atoms, ring bonds up to `%99`, dots,
//! map numbers. Stereo marks are carried through as text.

mod kekulize;
mod lexer;
mod parser;
mod writer;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::molgraph::MolGraph;

pub use lexer::{tokenize, SmilesToken, TokenKind};
pub use parser::{default_hydrogens, is_organic_subset};
pub use writer::{write_graph, WriteOptions, Written};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("unbalanced bracket at byte {offset}")]
    UnbalancedBracket { offset: usize },
    #[error("unbalanced branch at byte {offset}")]
    UnbalancedBranch { offset: usize },
    #[error("ring bond {ring} opened at byte {offset} is never closed")]
    UnclosedRing { ring: u32, offset: usize },
    #[error("ring bond {ring} closed at byte {offset} with a different bond order")]
    RingBondConflict { ring: u32, offset: usize },
    #[error("unexpected character `{ch}` at byte {offset}")]
    UnexpectedChar { ch: char, offset: usize },
    #[error("unknown element `{symbol}` at byte {offset}")]
    UnknownElement { symbol: String, offset: usize },
    #[error("unsupported bond symbol `{symbol}` at byte {offset}")]
    UnsupportedBond { symbol: char, offset: usize },
    #[error("bond symbol without two atoms at byte {offset}")]
    MisplacedBond { offset: usize },
    #[error("atoms bonded twice at byte {offset}")]
    DuplicateBond { offset: usize },
    #[error("map number {map} repeated at byte {offset}")]
    DuplicateMap { map: u32, offset: usize },
    #[error("invalid bracket atom at byte {offset}: {reason}")]
    InvalidBracket { reason: String, offset: usize },
    #[error("cannot kekulize aromatic system containing atom {atom}")]
    Kekulization { atom: usize },
}

impl SmilesError {
    /// Byte offset into the input, when the error has one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            SmilesError::UnbalancedBracket { offset }
            | SmilesError::UnbalancedBranch { offset }
            | SmilesError::UnclosedRing { offset, .. }
            | SmilesError::RingBondConflict { offset, .. }
            | SmilesError::UnexpectedChar { offset, .. }
            | SmilesError::UnknownElement { offset, .. }
            | SmilesError::UnsupportedBond { offset, .. }
            | SmilesError::MisplacedBond { offset }
            | SmilesError::DuplicateBond { offset }
            | SmilesError::DuplicateMap { offset, .. }
            | SmilesError::InvalidBracket { offset, .. } => Some(*offset),
            SmilesError::Kekulization { .. } => None,
        }
    }
}

/// Which map numbers the writer emits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapMode {
    All,
    /// Only these map numbers; explicit hydrogens outside the set are folded
    /// into their parent's count.
    Minimal(BTreeSet<u32>),
    None,
}

/// Parses dot-separated SMILES into a kekulized graph.
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    parser::parse(s)
}

/// Canonical SMILES for `g` in the given map mode.
pub fn write_smiles(g: &MolGraph, mode: &MapMode) -> String {
    prepare(g, mode).1
}

/// Graph actually written for `mode` (maps stripped, hydrogens folded) and
/// its text.
pub fn prepare(g: &MolGraph, mode: &MapMode) -> (MolGraph, String) {
    let prepared = match mode {
        MapMode::All => g.fold_hydrogens(|a| a.map.is_some()),
        MapMode::None => g.without_maps().fold_hydrogens(|_| false),
        MapMode::Minimal(keep) => {
            let mut h = g.fold_hydrogens(|a| a.map.is_some_and(|m| keep.contains(&m)));
            for idx in 0..h.atom_count() {
                let atom = h.atom_mut(idx);
                if atom.map.is_some_and(|m| !keep.contains(&m)) {
                    atom.map = None;
                }
            }
            h
        }
    };
    let use_maps = !matches!(mode, MapMode::None);
    let text = write_graph(
        &prepared,
        &WriteOptions {
            use_maps,
            stereo: true,
            force_brackets: false,
        },
    )
    .text;
    (prepared, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;
    use crate::molgraph::canonical_form;

    #[test]
    fn borane_fragment_with_mapped_hydrogen() {
        let g = parse_smiles("[BH3-:2][H:3]").unwrap();
        assert_eq!(g.atom_count(), 2);
        let b = g.find_map(2).unwrap();
        let h = g.find_map(3).unwrap();
        assert_eq!(g.atom(b).element, Element::B);
        assert_eq!(g.atom(b).charge, -1);
        assert_eq!(g.atom(b).implicit_h, 3);
        assert!(g.atom(h).explicit_h);
        assert_eq!(g.bond_order(b, h), 1);
    }

    #[test]
    fn water() {
        let g = parse_smiles("O").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.atom(0).implicit_h, 2);
        assert_eq!(g.atom(0).charge, 0);
    }

    #[test]
    fn reactant_set() {
        let g = parse_smiles("CC(=O)CCCC=O.O.[BH4-]").unwrap();
        assert_eq!(g.components().len(), 3);
        assert_eq!(g.formula().charge, -1);
    }

    #[test]
    fn error_offsets() {
        assert_eq!(
            parse_smiles("CC(C").unwrap_err(),
            SmilesError::UnbalancedBranch { offset: 2 }
        );
        assert_eq!(
            parse_smiles("C1CC").unwrap_err(),
            SmilesError::UnclosedRing { ring: 1, offset: 1 }
        );
        assert_eq!(
            parse_smiles("[CH3:1][OH:1]").unwrap_err(),
            SmilesError::DuplicateMap { map: 1, offset: 7 }
        );
        assert!(matches!(
            parse_smiles("C[Zz]").unwrap_err(),
            SmilesError::UnknownElement { offset: 2, .. }
        ));
        assert!(parse_smiles("C)").is_err());
        assert!(parse_smiles("C=").is_err());
        assert!(parse_smiles(".C").is_err());
    }

    #[test]
    fn aromatic_input_is_kekulized() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let doubles = g.bonds().filter(|(_, b)| b.order == 2).count();
        assert_eq!(doubles, 3);
        assert!(g.atoms().iter().all(|a| a.implicit_h == 1));
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(pyrrole.bonds().filter(|(_, b)| b.order == 2).count(), 2);
        let furan = parse_smiles("o1cccc1").unwrap();
        assert_eq!(
            canonical_form(&furan),
            canonical_form(&parse_smiles("C1=COC=C1").unwrap())
        );
        let pyridine = parse_smiles("n1ccccc1").unwrap();
        assert_eq!(pyridine.atom(0).implicit_h, 0);
        assert!(parse_smiles("c1cccc1").is_err());
    }

    #[test]
    fn writer_modes() {
        let g = parse_smiles("[CH3:1][C:2](=[O:3])[O-:4]").unwrap();
        assert_eq!(write_smiles(&g, &MapMode::None), "CC([O-])=O");
        let all = write_smiles(&g, &MapMode::All);
        assert_eq!(all.matches(':').count(), 4);
        let minimal = write_smiles(&g, &MapMode::Minimal([4].into_iter().collect()));
        assert_eq!(minimal.matches(':').count(), 1);
        assert!(minimal.contains("[O-:4]"));
    }

    #[test]
    fn writer_reference_strings() {
        let b = parse_smiles("[BH3]").unwrap();
        assert_eq!(write_smiles(&b, &MapMode::None), "B");
        let mix = parse_smiles("[OH-].O.[BH4-].O=CCCCC(C)=O.[BH4-].O.[OH-]").unwrap();
        assert_eq!(
            write_smiles(&mix, &MapMode::None),
            "CC(=O)CCCC=O.O.O.[BH4-].[BH4-].[OH-].[OH-]"
        );
    }

    #[test]
    fn explicit_hydrogens_survive_when_mapped() {
        let g = parse_smiles("[OH-:1].[H:2][O:3][H:4]").unwrap();
        let text = write_smiles(&g, &MapMode::All);
        let back = parse_smiles(&text).unwrap();
        assert_eq!(back.atom_count(), 4);
        for m in 1..=4 {
            assert!(back.find_map(m).is_some(), "{text}");
        }
    }

    #[test]
    fn stereo_marks_are_kept_verbatim() {
        let g = parse_smiles("F/C=C/F").unwrap();
        let text = write_smiles(&g, &MapMode::None);
        assert_eq!(text.matches('/').count() + text.matches('\\').count(), 2);
        let chiral = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert!(write_smiles(&chiral, &MapMode::None).contains('@'));
    }

    #[test]
    fn rings_round_trip() {
        for s in ["C1CCCCC1", "C12CC1CC2", "C1=CC=CC=C1CC1CC1", "C%10CC%10"] {
            let g = parse_smiles(s).unwrap();
            let text = write_smiles(&g, &MapMode::None);
            let back = parse_smiles(&text).unwrap();
            assert_eq!(canonical_form(&back), canonical_form(&g), "{s} -> {text}");
        }
    }
}

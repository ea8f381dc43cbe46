use std::collections::{BTreeMap, HashSet};

use super::kekulize::kekulize;
use super::lexer::{tokenize, SmilesToken, TokenKind};
use super::SmilesError;
use crate::element::Element;
use crate::molgraph::{Atom, BondDirection, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSym {
    fn from_char(c: char, offset: usize) -> Result<BondSym, SmilesError> {
        Ok(match c {
            '-' => BondSym::Single,
            '=' => BondSym::Double,
            '#' => BondSym::Triple,
            ':' => BondSym::Aromatic,
            '/' => BondSym::Up,
            '\\' => BondSym::Down,
            _ => return Err(SmilesError::UnsupportedBond { symbol: c, offset }),
        })
    }

    fn order(self) -> u8 {
        match self {
            BondSym::Double => 2,
            BondSym::Triple => 3,
            _ => 1,
        }
    }
}

pub(super) struct ParsedAtom {
    pub atom: Atom,
    pub aromatic: bool,
    pub bracket: bool,
}

pub(super) struct PendingBond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
    pub aromatic: bool,
    pub direction: Option<BondDirection>,
}

fn organic_default_valences(el: Element) -> &'static [u8] {
    match el.symbol() {
        "B" => &[3],
        "C" => &[4],
        "N" => &[3, 5],
        "O" => &[2],
        "P" => &[3, 5],
        "S" => &[2, 4, 6],
        "F" | "Cl" | "Br" | "I" => &[1],
        _ => &[],
    }
}

/// Implicit hydrogen count for an organic-subset atom with the given bond
/// order sum.
pub fn default_hydrogens(el: Element, bond_sum: u32) -> u32 {
    organic_default_valences(el)
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= bond_sum)
        .map_or(0, |v| v - bond_sum)
}

pub fn is_organic_subset(el: Element) -> bool {
    !organic_default_valences(el).is_empty()
}

fn parse_bracket(lexeme: &str, offset: usize) -> Result<(Atom, bool, u8), SmilesError> {
    let body = &lexeme[1..lexeme.len() - 1];
    let bad = |reason: &str| SmilesError::InvalidBracket {
        reason: reason.to_string(),
        offset,
    };
    let b = body.as_bytes();

    let digits_end =
        |from: usize| from + b[from..].iter().take_while(|c| c.is_ascii_digit()).count();

    let iso_end = digits_end(0);
    let isotope = if iso_end > 0 {
        Some(
            body[..iso_end]
                .parse::<u16>()
                .map_err(|_| bad("isotope out of range"))?,
        )
    } else {
        None
    };
    let mut i = iso_end;

    // element symbol
    let rest = &body[i..];
    let (element, aromatic, sym_len) = if let Some(sym) =
        ["se", "as", "te"].iter().find(|s| rest.starts_with(**s))
    {
        let upper = format!("{}{}", sym[..1].to_ascii_uppercase(), &sym[1..]);
        (Element::from_symbol(&upper).unwrap(), true, 2)
    } else {
        let first = rest.chars().next().ok_or_else(|| bad("missing element"))?;
        if first.is_ascii_lowercase() {
            if !['b', 'c', 'n', 'o', 'p', 's'].contains(&first) {
                return Err(SmilesError::UnknownElement {
                    symbol: first.to_string(),
                    offset: offset + 1 + i,
                });
            }
            let el = Element::from_symbol(&first.to_ascii_uppercase().to_string()).unwrap();
            (el, true, 1)
        } else if first.is_ascii_uppercase() {
            let two: String = rest.chars().take(2).collect();
            let two_ok = two.len() == 2
                && two.chars().nth(1).is_some_and(|c| c.is_ascii_lowercase())
                && Element::from_symbol(&two).is_some();
            if two_ok {
                (Element::from_symbol(&two).unwrap(), false, 2)
            } else {
                let one = first.to_string();
                let el = Element::from_symbol(&one).ok_or_else(|| SmilesError::UnknownElement {
                    symbol: if two.len() == 2 && two.chars().nth(1).unwrap().is_ascii_lowercase() {
                        two.clone()
                    } else {
                        one.clone()
                    },
                    offset: offset + 1 + i,
                })?;
                (el, false, 1)
            }
        } else {
            return Err(bad("missing element"));
        }
    };
    i += sym_len;

    let mut chirality = None;
    if i < b.len() && b[i] == b'@' {
        let start = i;
        i += 1;
        if i < b.len() && b[i] == b'@' {
            i += 1;
        } else if ["TH", "AL", "SP", "TB", "OH"]
            .iter()
            .any(|c| body[i..].starts_with(c))
        {
            i = digits_end(i + 2);
        }
        chirality = Some(body[start..i].to_string());
    }

    let mut hcount = 0u8;
    if i < b.len() && b[i] == b'H' {
        i += 1;
        let end = digits_end(i);
        hcount = if end > i {
            body[i..end]
                .parse::<u8>()
                .map_err(|_| bad("hydrogen count out of range"))?
        } else {
            1
        };
        i = end;
    }

    let mut charge: i32 = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        let sign = if b[i] == b'+' { 1 } else { -1 };
        let sym = b[i];
        i += 1;
        let end = digits_end(i);
        if end > i {
            charge = sign
                * body[i..end]
                    .parse::<i32>()
                    .map_err(|_| bad("charge out of range"))?;
            i = end;
        } else {
            let mut n = 1;
            while i < b.len() && b[i] == sym {
                n += 1;
                i += 1;
            }
            charge = sign * n;
        }
    }
    if !(-8..=8).contains(&charge) {
        return Err(bad("charge out of range"));
    }

    let mut map = None;
    if i < b.len() && b[i] == b':' {
        i += 1;
        let end = digits_end(i);
        if end == i {
            return Err(bad("map number expected after ':'"));
        }
        let m = body[i..end]
            .parse::<u32>()
            .map_err(|_| bad("map number out of range"))?;
        if m > 0 {
            map = Some(m);
        }
        i = end;
    }
    if i != b.len() {
        return Err(bad("trailing characters"));
    }
    if element.is_hydrogen() && hcount > 0 {
        return Err(bad("hydrogen with hydrogen count"));
    }

    let mut atom = Atom::new(element);
    atom.charge = charge as i8;
    atom.map = map;
    atom.isotope = isotope;
    atom.chirality = chirality;
    atom.implicit_h = if element.is_hydrogen() { 0 } else { hcount };
    Ok((atom, aromatic, hcount))
}

fn parse_organic(lexeme: &str) -> (Atom, bool) {
    let aromatic = lexeme.chars().next().unwrap().is_ascii_lowercase();
    let symbol = if aromatic {
        lexeme.to_ascii_uppercase()
    } else {
        lexeme.to_string()
    };
    (
        Atom::new(Element::from_symbol(&symbol).expect("lexer checked")),
        aromatic,
    )
}

pub fn parse(s: &str) -> Result<MolGraph, SmilesError> {
    let tokens = tokenize(s)?;
    let mut atoms: Vec<ParsedAtom> = Vec::new();
    let mut bonds: Vec<PendingBond> = Vec::new();
    let mut bonded: HashSet<(usize, usize)> = HashSet::new();
    let mut prev: Option<usize> = None;
    let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
    let mut pending: Option<(BondSym, usize)> = None;
    let mut rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();
    let mut maps: BTreeMap<u32, usize> = BTreeMap::new();

    let mut connect = |atoms: &Vec<ParsedAtom>,
                       bonds: &mut Vec<PendingBond>,
                       a: usize,
                       b: usize,
                       sym: Option<BondSym>,
                       offset: usize|
     -> Result<(), SmilesError> {
        let k = (a.min(b), a.max(b));
        if a == b || !bonded.insert(k) {
            return Err(SmilesError::DuplicateBond { offset });
        }
        let both_aromatic = atoms[a].aromatic && atoms[b].aromatic;
        let (order, aromatic) = match sym {
            Some(BondSym::Aromatic) => (1, true),
            Some(s) => (s.order(), false),
            None => (1, both_aromatic),
        };
        let direction = match sym {
            Some(BondSym::Up) => Some(BondDirection { from: a, up: true }),
            Some(BondSym::Down) => Some(BondDirection { from: a, up: false }),
            _ => None,
        };
        bonds.push(PendingBond {
            a,
            b,
            order,
            aromatic,
            direction,
        });
        Ok(())
    };

    let mut expect_atom_after_dot = false;
    for tok in &tokens {
        let SmilesToken {
            kind,
            lexeme,
            offset,
        } = tok;
        let offset = *offset;
        match kind {
            TokenKind::OrganicAtom | TokenKind::BracketAtom => {
                let (atom, aromatic, bracket) = if *kind == TokenKind::BracketAtom {
                    let (atom, aromatic, _) = parse_bracket(lexeme, offset)?;
                    (atom, aromatic, true)
                } else {
                    let (atom, aromatic) = parse_organic(lexeme);
                    (atom, aromatic, false)
                };
                if let Some(m) = atom.map {
                    if maps.insert(m, offset).is_some() {
                        return Err(SmilesError::DuplicateMap { map: m, offset });
                    }
                }
                atoms.push(ParsedAtom {
                    atom,
                    aromatic,
                    bracket,
                });
                let idx = atoms.len() - 1;
                if let Some(p) = prev {
                    let sym = pending.take().map(|(s, _)| s);
                    connect(&atoms, &mut bonds, p, idx, sym, offset)?;
                } else if let Some((_, off)) = pending.take() {
                    return Err(SmilesError::MisplacedBond { offset: off });
                }
                prev = Some(idx);
                expect_atom_after_dot = false;
            }
            TokenKind::Bond => {
                if pending.is_some() || prev.is_none() {
                    return Err(SmilesError::MisplacedBond { offset });
                }
                pending = Some((
                    BondSym::from_char(lexeme.chars().next().unwrap(), offset)?,
                    offset,
                ));
            }
            TokenKind::BranchOpen => {
                if prev.is_none() {
                    return Err(SmilesError::UnbalancedBranch { offset });
                }
                branches.push((prev, offset));
            }
            TokenKind::BranchClose => {
                let (p, _) = branches
                    .pop()
                    .ok_or(SmilesError::UnbalancedBranch { offset })?;
                if let Some((_, off)) = pending {
                    return Err(SmilesError::MisplacedBond { offset: off });
                }
                prev = p;
            }
            TokenKind::RingClosure => {
                let cur = prev.ok_or(SmilesError::MisplacedBond { offset })?;
                let digits = lexeme.trim_start_matches('%');
                let ring: u32 = digits.parse().expect("lexer checked digits");
                let sym = pending.take().map(|(s, _)| s);
                match rings.remove(&ring) {
                    Some((open, open_sym, _)) => {
                        let sym = match (open_sym, sym) {
                            (Some(a), Some(b)) if a.order() != b.order() => {
                                return Err(SmilesError::RingBondConflict { ring, offset })
                            }
                            (Some(a), _) => Some(a),
                            (None, b) => b,
                        };
                        connect(&atoms, &mut bonds, open, cur, sym, offset)?;
                    }
                    None => {
                        rings.insert(ring, (cur, sym, offset));
                    }
                }
            }
            TokenKind::Dot => {
                if let Some((_, off)) = pending {
                    return Err(SmilesError::MisplacedBond { offset: off });
                }
                if prev.is_none() {
                    return Err(SmilesError::UnexpectedChar { ch: '.', offset });
                }
                prev = None;
                expect_atom_after_dot = true;
            }
        }
    }
    if let Some((_, off)) = pending {
        return Err(SmilesError::MisplacedBond { offset: off });
    }
    if let Some((_, off)) = branches.last() {
        return Err(SmilesError::UnbalancedBranch { offset: *off });
    }
    if let Some((ring, (_, _, off))) = rings.iter().next() {
        return Err(SmilesError::UnclosedRing {
            ring: *ring,
            offset: *off,
        });
    }
    if expect_atom_after_dot {
        return Err(SmilesError::UnexpectedChar {
            ch: '.',
            offset: s.len().saturating_sub(1),
        });
    }

    assign_implicit_hydrogens(&mut atoms, &bonds);
    kekulize(&atoms, &mut bonds)?;

    let mut g = MolGraph::new();
    for p in atoms {
        g.add_atom(p.atom);
    }
    for b in bonds {
        g.add_bond(b.a, b.b, b.order)
            .expect("parser produced a valid bond");
        if let Some(dir) = b.direction {
            g.set_bond_direction(b.a, b.b, dir);
        }
    }
    Ok(g)
}

/// Valence fill for unbracketed atoms; aromatic bonds count one each plus
/// one shared pi bond per aromatic atom.
fn assign_implicit_hydrogens(atoms: &mut [ParsedAtom], bonds: &[PendingBond]) {
    let n = atoms.len();
    let mut sum = vec![0u32; n];
    let mut aromatic_bonds = vec![0u32; n];
    for b in bonds {
        if b.aromatic {
            aromatic_bonds[b.a] += 1;
            aromatic_bonds[b.b] += 1;
            sum[b.a] += 1;
            sum[b.b] += 1;
        } else {
            sum[b.a] += b.order as u32;
            sum[b.b] += b.order as u32;
        }
    }
    for (i, p) in atoms.iter_mut().enumerate() {
        if p.bracket || p.atom.element.is_hydrogen() {
            continue;
        }
        let base = if p.aromatic { sum[i] + 1 } else { sum[i] };
        p.atom.implicit_h = default_hydrogens(p.atom.element, base) as u8;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_attributes() {
        let (a, arom, h) = parse_bracket("[13CH3+:7]", 0).unwrap();
        assert_eq!(a.element, Element::C);
        assert_eq!(a.isotope, Some(13));
        assert_eq!(a.implicit_h, 3);
        assert_eq!(h, 3);
        assert_eq!(a.charge, 1);
        assert_eq!(a.map, Some(7));
        assert!(!arom);
        let (a, _, _) = parse_bracket("[Fe++]", 0).unwrap();
        assert_eq!(a.charge, 2);
        let (a, _, _) = parse_bracket("[C@@H]", 0).unwrap();
        assert_eq!(a.chirality.as_deref(), Some("@@"));
        assert_eq!(a.implicit_h, 1);
        let (a, arom, _) = parse_bracket("[nH]", 0).unwrap();
        assert!(arom);
        assert_eq!(a.element, Element::N);
        let (a, _, _) = parse_bracket("[Pd]", 0).unwrap();
        assert_eq!(a.element, Element::PD);
        assert!(parse_bracket("[Qq]", 4).is_err());
    }

    #[test]
    fn default_fill() {
        assert_eq!(default_hydrogens(Element::C, 1), 3);
        assert_eq!(default_hydrogens(Element::N, 4), 1);
        assert_eq!(default_hydrogens(Element::S, 3), 1);
        assert_eq!(default_hydrogens(Element::B, 0), 3);
        assert_eq!(default_hydrogens(Element::O, 3), 0);
    }
}

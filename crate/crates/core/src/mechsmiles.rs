//! MechSMILES: a mapped SMILES, `|`, and a `;`-separated arrow list.
//!
//! Arrow spellings:
//! * `(a,b)`: atom `a` attacks atom `b` with a lone pair
//! * `((a,b),b)`: bond `a-b` collapses onto `b`
//! * `((a,b),c)`: bond `a-b` attacks `c` through `b`

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::molgraph::MolGraph;
use crate::smiles::{parse_smiles, write_smiles, MapMode, SmilesError};

/// One electron-pair move between map-numbered atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arrow {
    Attack(u32, u32),
    Ionize(u32, u32),
    BondAttack(u32, u32, u32),
}

impl Arrow {
    pub fn maps(&self) -> Vec<u32> {
        match *self {
            Arrow::Attack(a, b) | Arrow::Ionize(a, b) => vec![a, b],
            Arrow::BondAttack(a, b, c) => vec![a, b, c],
        }
    }

    /// Atom that receives the electron pair.
    pub fn sink(&self) -> u32 {
        match *self {
            Arrow::Attack(_, b) | Arrow::Ionize(_, b) => b,
            Arrow::BondAttack(_, _, c) => c,
        }
    }

    /// First atom of the electron source (the lone-pair atom or the bond end
    /// that gives up the pair).
    pub fn origin(&self) -> u32 {
        match *self {
            Arrow::Attack(a, _) | Arrow::Ionize(a, _) | Arrow::BondAttack(a, _, _) => a,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Arrow::Attack(..) => "attack",
            Arrow::Ionize(..) => "ionize",
            Arrow::BondAttack(..) => "bond_attack",
        }
    }

    /// Same arrow with map numbers translated.
    pub fn remap(&self, f: impl Fn(u32) -> u32) -> Arrow {
        match *self {
            Arrow::Attack(a, b) => Arrow::Attack(f(a), f(b)),
            Arrow::Ionize(a, b) => Arrow::Ionize(f(a), f(b)),
            Arrow::BondAttack(a, b, c) => Arrow::BondAttack(f(a), f(b), f(c)),
        }
    }

    fn check(self) -> Result<Arrow, String> {
        match self {
            Arrow::Attack(a, b) | Arrow::Ionize(a, b) if a == b => {
                Err(format!("arrow endpoints must differ ({a})"))
            }
            Arrow::BondAttack(a, b, _) if a == b => {
                Err(format!("bond endpoints must differ ({a})"))
            }
            _ => Ok(self),
        }
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Arrow::Attack(a, b) => write!(f, "({a},{b})"),
            Arrow::Ionize(a, b) => write!(f, "(({a},{b}),{b})"),
            Arrow::BondAttack(a, b, c) => write!(f, "(({a},{b}),{c})"),
        }
    }
}

impl FromStr for Arrow {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Arrow, MechError> {
        parse_arrow(s, 0)
    }
}

impl Serialize for Arrow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Arrow {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Arrow, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MechError {
    #[error("missing `|` between SMILES and arrows")]
    MissingSeparator,
    #[error("malformed arrow at byte {offset}: {reason}")]
    MalformedArrow { offset: usize, reason: String },
    #[error("arrow at byte {offset} references map {map}, which is not in the SMILES")]
    DanglingMap { map: u32, offset: usize },
    #[error("SMILES: {0}")]
    Smiles(#[from] SmilesError),
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Minimal,
    Equilibrated,
}

/// A host structure plus the arrows applied to it as one elementary step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechStep {
    pub host: MolGraph,
    pub arrows: Vec<Arrow>,
}

impl MechStep {
    pub fn new(host: MolGraph, arrows: Vec<Arrow>) -> MechStep {
        MechStep { host, arrows }
    }

    pub fn referenced_maps(&self) -> BTreeSet<u32> {
        self.arrows.iter().flat_map(|a| a.maps()).collect()
    }

    /// Minimal when every host component holds an arrow-referenced atom.
    pub fn scope(&self) -> Scope {
        let refs = self.referenced_maps();
        let all_touched = self.host.components().iter().all(|c| {
            c.iter()
                .any(|&i| self.host.atom(i).map.is_some_and(|m| refs.contains(&m)))
        });
        if all_touched {
            Scope::Minimal
        } else {
            Scope::Equilibrated
        }
    }

    /// Host restricted to components holding an arrow-referenced atom.
    pub fn minimal_host(&self) -> MolGraph {
        let refs = self.referenced_maps();
        let keep: Vec<usize> = self
            .host
            .components()
            .into_iter()
            .filter(|c| {
                c.iter()
                    .any(|&i| self.host.atom(i).map.is_some_and(|m| refs.contains(&m)))
            })
            .flatten()
            .collect();
        let mut keep = keep;
        keep.sort_unstable();
        self.host.subgraph(&keep)
    }

    pub fn serialize(&self, scope: Scope) -> String {
        let refs = self.referenced_maps();
        let host = match scope {
            Scope::Minimal => self.minimal_host(),
            Scope::Equilibrated => self.host.clone(),
        };
        let smiles = write_smiles(&host, &MapMode::Minimal(refs));
        let arrows: Vec<String> = self.arrows.iter().map(Arrow::to_string).collect();
        format!("{smiles}|{}", arrows.join(";"))
    }

    /// Canonical minimal spelling.
    pub fn to_minimal(&self) -> String {
        self.serialize(Scope::Minimal)
    }
}

impl fmt::Display for MechStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize(Scope::Equilibrated))
    }
}

impl FromStr for MechStep {
    type Err = MechError;

    fn from_str(s: &str) -> Result<MechStep, MechError> {
        parse_mechsmiles(s)
    }
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
    base: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, reason: impl Into<String>) -> MechError {
        MechError::MalformedArrow {
            offset: self.base + self.pos,
            reason: reason.into(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), MechError> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u32, MechError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a map number"));
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        let n: u32 = text
            .parse()
            .map_err(|_| self.err("map number out of range"))?;
        if n == 0 {
            return Err(MechError::MalformedArrow {
                offset: self.base + start,
                reason: "map number 0 is not an atom label".into(),
            });
        }
        Ok(n)
    }
}

fn parse_arrow(text: &str, base: usize) -> Result<Arrow, MechError> {
    let mut c = Cursor {
        s: text.as_bytes(),
        pos: 0,
        base,
    };
    c.expect(b'(')?;
    let arrow = if c.peek() == Some(b'(') {
        c.expect(b'(')?;
        let a = c.number()?;
        c.expect(b',')?;
        let b = c.number()?;
        c.expect(b')')?;
        c.expect(b',')?;
        let t = c.number()?;
        c.expect(b')')?;
        if t == b {
            Arrow::Ionize(a, b)
        } else if t == a {
            Arrow::Ionize(b, a)
        } else {
            Arrow::BondAttack(a, b, t)
        }
    } else {
        let a = c.number()?;
        c.expect(b',')?;
        let b = c.number()?;
        c.expect(b')')?;
        Arrow::Attack(a, b)
    };
    c.skip_ws();
    if c.pos != c.s.len() {
        return Err(c.err("trailing characters after arrow"));
    }
    arrow.check().map_err(|reason| MechError::MalformedArrow {
        offset: base,
        reason,
    })
}

/// Parses an arrow list such as `((2, 3), 4);((4, 1), 1)`. `base` offsets
/// the reported byte positions.
pub fn parse_arrows(text: &str, base: usize) -> Result<Vec<(Arrow, usize)>, MechError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut offset = base;
    for part in text.split(';') {
        let lead = part.len() - part.trim_start().len();
        out.push((parse_arrow(part, offset)?, offset + lead));
        offset += part.len() + 1;
    }
    Ok(out)
}

pub fn parse_mechsmiles(s: &str) -> Result<MechStep, MechError> {
    let bar = s.find('|').ok_or(MechError::MissingSeparator)?;
    let host = parse_smiles(s[..bar].trim_end())?;
    let arrows = parse_arrows(&s[bar + 1..], bar + 1)?;
    let maps = host.map_index();
    for (arrow, offset) in &arrows {
        for m in arrow.maps() {
            if !maps.contains_key(&m) {
                return Err(MechError::DanglingMap {
                    map: m,
                    offset: *offset,
                });
            }
        }
    }
    Ok(MechStep {
        host,
        arrows: arrows.into_iter().map(|(a, _)| a).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Population mean and standard deviation.
    pub fn of(values: &[usize]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.0} ± {:.0}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharStats {
    pub minimal: MeanStd,
    pub equilibrated: MeanStd,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<MeanStd>,
}

/// Character counts of one step in minimal and equilibrated form.
pub fn step_lengths(step: &MechStep) -> (usize, usize) {
    (
        step.serialize(Scope::Minimal).chars().count(),
        step.serialize(Scope::Equilibrated).chars().count(),
    )
}

impl CharStats {
    pub fn from_lengths(
        minimal: &[usize],
        equilibrated: &[usize],
        source: &[usize],
    ) -> Result<CharStats, MechError> {
        Ok(CharStats {
            minimal: MeanStd::of(minimal).ok_or(MechError::EmptyCorpus)?,
            equilibrated: MeanStd::of(equilibrated).ok_or(MechError::EmptyCorpus)?,
            source: MeanStd::of(source),
        })
    }
}

/// Character counts per elementary step in minimal and equilibrated form,
/// plus the original source lengths when given.
pub fn char_stats<'a>(
    steps: impl IntoIterator<Item = &'a MechStep>,
    source_lengths: &[usize],
) -> Result<CharStats, MechError> {
    let (minimal, equilibrated): (Vec<usize>, Vec<usize>) = steps.into_iter().map(step_lengths).unzip();
    CharStats::from_lengths(&minimal, &equilibrated, source_lengths)
}

//! Stable-intermediate compliance: allowed valences per element and charge.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GraphError, MolGraph};
use crate::element::Element;

/// Allowed total bond orders (implicit hydrogens included) for each element
/// and formal charge. Transition metals are exempt and need no entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValenceTable {
    entries: BTreeMap<Element, BTreeMap<i8, Vec<u8>>>,
}

/// On-disk form: `{"C": {"0": [4], "1": [3], "-1": [3]}, ...}`.
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct TableRepr(BTreeMap<String, BTreeMap<String, Vec<u8>>>);

type Row<'a> = (&'a str, &'a [(i8, &'a [u8])]);

impl Default for ValenceTable {
    fn default() -> Self {
        let mut t = ValenceTable {
            entries: BTreeMap::new(),
        };
        let rows: &[Row] = &[
            ("H", &[(-1, &[0]), (0, &[1]), (1, &[0])]),
            ("Li", &[(0, &[1]), (1, &[0])]),
            ("Na", &[(0, &[1]), (1, &[0])]),
            ("K", &[(0, &[1]), (1, &[0])]),
            ("Rb", &[(0, &[1]), (1, &[0])]),
            ("Cs", &[(0, &[1]), (1, &[0])]),
            ("Mg", &[(0, &[2]), (1, &[1]), (2, &[0])]),
            ("Ca", &[(0, &[2]), (1, &[1]), (2, &[0])]),
            ("B", &[(-1, &[4]), (0, &[3])]),
            ("Al", &[(-1, &[4]), (0, &[3])]),
            ("C", &[(-1, &[3]), (0, &[4]), (1, &[3])]),
            ("Si", &[(0, &[4])]),
            ("Sn", &[(0, &[4])]),
            ("N", &[(-1, &[2]), (0, &[3]), (1, &[4])]),
            ("P", &[(-1, &[2]), (0, &[3, 5]), (1, &[4])]),
            ("As", &[(0, &[3, 5]), (1, &[4])]),
            ("O", &[(-1, &[1]), (0, &[2]), (1, &[3])]),
            ("S", &[(-1, &[1]), (0, &[2, 4, 6]), (1, &[3])]),
            ("Se", &[(-1, &[1]), (0, &[2, 4, 6]), (1, &[3])]),
            ("F", &[(-1, &[0]), (0, &[1])]),
            ("Cl", &[(-1, &[0]), (0, &[1]), (1, &[2])]),
            ("Br", &[(-1, &[0]), (0, &[1]), (1, &[2])]),
            ("I", &[(-1, &[0]), (0, &[1, 3, 5]), (1, &[2])]),
        ];
        for (symbol, charges) in rows {
            let el = Element::from_symbol(symbol).expect("table symbol");
            for (charge, valences) in charges.iter() {
                t.set(el, *charge, valences.to_vec());
            }
        }
        t
    }
}

impl ValenceTable {
    pub fn empty() -> ValenceTable {
        ValenceTable {
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, element: Element, charge: i8, mut valences: Vec<u8>) {
        valences.sort_unstable();
        valences.dedup();
        self.entries
            .entry(element)
            .or_default()
            .insert(charge, valences);
    }

    pub fn allowed(&self, element: Element, charge: i8) -> Option<&[u8]> {
        self.entries.get(&element)?.get(&charge).map(Vec::as_slice)
    }

    pub fn max_valence(&self, element: Element, charge: i8) -> Option<u8> {
        self.allowed(element, charge)?.last().copied()
    }

    pub fn knows(&self, element: Element) -> bool {
        element.is_transition_metal() || self.entries.contains_key(&element)
    }

    pub fn from_json(text: &str) -> Result<ValenceTable, String> {
        let repr: TableRepr = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut t = ValenceTable::empty();
        for (symbol, charges) in repr.0 {
            let el = Element::from_symbol(&symbol)
                .ok_or_else(|| format!("unknown element symbol `{symbol}`"))?;
            for (charge, valences) in charges {
                let charge: i8 = charge
                    .parse()
                    .map_err(|_| format!("bad charge key `{charge}` for {symbol}"))?;
                t.set(el, charge, valences);
            }
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        let repr = TableRepr(
            self.entries
                .iter()
                .map(|(el, charges)| {
                    (
                        el.symbol().to_string(),
                        charges
                            .iter()
                            .map(|(c, v)| (c.to_string(), v.clone()))
                            .collect(),
                    )
                })
                .collect(),
        );
        serde_json::to_string_pretty(&repr).expect("table serializes")
    }

    /// Checks a single atom given its total bond order.
    pub fn atom_violation(
        &self,
        element: Element,
        charge: i8,
        valence: u32,
    ) -> Result<Option<ViolationKind>, GraphError> {
        if element.is_transition_metal() {
            return Ok(None);
        }
        let charges = self
            .entries
            .get(&element)
            .ok_or_else(|| GraphError::UnknownElement(element.symbol().to_string()))?;
        let Some(allowed) = charges.get(&charge) else {
            return Ok(Some(ViolationKind::UnsupportedCharge { charge }));
        };
        let max = allowed.last().copied().unwrap_or(0) as u32;
        if valence > max {
            return Ok(Some(ViolationKind::OverValence { valence, max }));
        }
        if let Some(v) = element.valence_electrons() {
            let nonbonding = v as i32 - charge as i32 - valence as i32;
            if nonbonding < 0 {
                return Ok(Some(ViolationKind::NegativeNonbonding {
                    electrons: nonbonding,
                }));
            }
            if nonbonding % 2 != 0 {
                return Ok(Some(ViolationKind::OddNonbonding {
                    electrons: nonbonding,
                }));
            }
            if let Some(cap) = element.shell_capacity() {
                let shell = nonbonding + 2 * valence as i32;
                if shell > cap as i32 {
                    return Ok(Some(ViolationKind::OctetExceeded {
                        electrons: shell,
                        capacity: cap,
                    }));
                }
            }
        }
        if !allowed.iter().any(|&a| a as u32 == valence) {
            return Ok(Some(ViolationKind::ValenceMismatch {
                valence,
                allowed: allowed.clone(),
            }));
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    UnsupportedCharge { charge: i8 },
    OverValence { valence: u32, max: u32 },
    NegativeNonbonding { electrons: i32 },
    OddNonbonding { electrons: i32 },
    OctetExceeded { electrons: i32, capacity: u8 },
    ValenceMismatch { valence: u32, allowed: Vec<u8> },
}

impl ViolationKind {
    pub fn is_over_valence(&self) -> bool {
        matches!(
            self,
            ViolationKind::OverValence { .. }
                | ViolationKind::NegativeNonbonding { .. }
                | ViolationKind::OctetExceeded { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub atom: usize,
    pub element: Element,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<u32>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.element)?;
        match self.map {
            Some(m) => write!(f, ":{m}")?,
            None => write!(f, "#{}", self.atom)?,
        }
        match &self.kind {
            ViolationKind::UnsupportedCharge { charge } => {
                write!(f, " unsupported charge {charge:+}")
            }
            ViolationKind::OverValence { valence, max } => {
                write!(f, " over-valence ({valence} > {max})")
            }
            ViolationKind::NegativeNonbonding { electrons } => {
                write!(f, " negative nonbonding electrons ({electrons})")
            }
            ViolationKind::OddNonbonding { electrons } => {
                write!(f, " odd nonbonding electrons ({electrons})")
            }
            ViolationKind::OctetExceeded {
                electrons,
                capacity,
            } => {
                write!(f, " shell holds {electrons} > {capacity} electrons")
            }
            ViolationKind::ValenceMismatch { valence, allowed } => {
                write!(f, " valence {valence} not in {allowed:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub violations: Vec<Violation>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-atom compliance check against `table`; an empty report means stable.
pub fn validate(g: &MolGraph, table: &ValenceTable) -> Result<StabilityReport, GraphError> {
    let mut violations = Vec::new();
    for (idx, atom) in g.atoms().iter().enumerate() {
        if let Some(kind) = table.atom_violation(atom.element, atom.charge, g.valence_sum(idx))? {
            violations.push(Violation {
                atom: idx,
                element: atom.element,
                map: atom.map,
                kind,
            });
        }
    }
    Ok(StabilityReport { violations })
}

//! The arrow-pushing environment: states, atomic arrow application, move
//! enumeration and the stable-intermediate check.

mod bind;
mod enumerate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechsmiles::{Arrow, MechStep};
use crate::molgraph::{
    canonical_form, validate, Formula, GraphError, MolGraph, ValenceTable, Violation,
};
use crate::smiles::{parse_smiles, write_smiles, MapMode, SmilesError};

pub use bind::{bind_step, BindError};
pub use enumerate::{EnumOptions, MoveSet};

/// A set of molecules with every atom, hydrogens included, present as its
/// own map-numbered vertex.
#[derive(Debug, Clone)]
pub struct State {
    graph: MolGraph,
    index: HashMap<u32, usize>,
}

impl PartialEq for State {
    fn eq(&self, other: &State) -> bool {
        self.graph == other.graph
    }
}

impl Eq for State {}

impl State {
    /// Materializes implicit hydrogens and gives every unmapped atom a fresh
    /// map number above the current maximum, in atom order.
    pub fn from_graph(g: &MolGraph) -> Result<State, GraphError> {
        g.check_unique_maps()?;
        let mut graph = g.with_explicit_hydrogens();
        let mut next = graph.max_map();
        for idx in 0..graph.atom_count() {
            let atom = graph.atom_mut(idx);
            if atom.map.is_none() {
                next += 1;
                atom.map = Some(next);
            }
        }
        Ok(State::from_explicit(graph))
    }

    /// Wraps a graph that is already fully explicit and mapped.
    fn from_explicit(graph: MolGraph) -> State {
        let index = graph.map_index();
        debug_assert_eq!(index.len(), graph.atom_count());
        State { graph, index }
    }

    pub fn from_smiles(s: &str) -> Result<State, StateError> {
        let g = parse_smiles(s)?;
        Ok(State::from_graph(&g)?)
    }

    pub fn graph(&self) -> &MolGraph {
        &self.graph
    }

    pub fn atom_index(&self, map: u32) -> Option<usize> {
        self.index.get(&map).copied()
    }

    /// Map-free canonical key of the whole state.
    pub fn canonical(&self) -> String {
        canonical_form(&self.graph)
    }

    /// Canonical key of every component, sorted.
    pub fn component_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self
            .graph
            .split_components()
            .iter()
            .map(canonical_form)
            .collect();
        keys.sort();
        keys
    }

    pub fn smiles(&self, mode: &MapMode) -> String {
        write_smiles(&self.graph, mode)
    }

    pub fn formula(&self) -> Formula {
        self.graph.formula()
    }

    /// Graph of the components that hold any of `maps`.
    pub fn components_with(&self, maps: &[u32]) -> MolGraph {
        let comp_ids = self.graph.component_ids();
        let wanted: Vec<usize> = maps
            .iter()
            .filter_map(|m| self.atom_index(*m))
            .map(|i| comp_ids[i])
            .collect();
        let atoms: Vec<usize> = (0..self.graph.atom_count())
            .filter(|&i| wanted.contains(&comp_ids[i]))
            .collect();
        self.graph.subgraph(&atoms)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ApplyError {
    #[error("arrow {arrow} references map {map}, which is not in the state")]
    UnknownMap { arrow: Arrow, map: u32 },
    #[error("arrow {arrow}: atom {map} has no lone pair to donate")]
    NoLonePair { arrow: Arrow, map: u32 },
    #[error("arrow {arrow}: atoms {a} and {b} are not bonded")]
    NoBond { arrow: Arrow, a: u32, b: u32 },
    #[error("arrow {arrow}: target repeats a bond atom")]
    DegenerateArrow { arrow: Arrow },
    #[error("arrows drive the bond {a}-{b} below zero")]
    NegativeBondOrder { a: u32, b: u32 },
    #[error("arrows raise the bond {a}-{b} to order {order}")]
    BondOrderOverflow { a: u32, b: u32, order: i32 },
    #[error("formal charge on atom {map} out of range")]
    ChargeOverflow { map: u32 },
    #[error("unstable result: {}", format_violations(.violations))]
    Unstable { violations: Vec<Violation> },
    #[error("element `{symbol}` has no entry in the valence table")]
    UnknownElement { symbol: String },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Bond-order and charge changes, keyed by atom index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delta {
    pub bonds: BTreeMap<(usize, usize), i32>,
    pub charges: BTreeMap<usize, i32>,
}

impl Delta {
    fn bond(&mut self, a: usize, b: usize, d: i32) {
        *self.bonds.entry((a.min(b), a.max(b))).or_insert(0) += d;
    }

    fn charge(&mut self, a: usize, d: i32) {
        *self.charges.entry(a).or_insert(0) += d;
    }

    pub fn is_zero(&self) -> bool {
        self.bonds.values().all(|&d| d == 0) && self.charges.values().all(|&d| d == 0)
    }
}

/// Stability rules plus the operations that depend on them.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    pub table: ValenceTable,
}

impl Engine {
    pub fn new(table: ValenceTable) -> Engine {
        Engine { table }
    }

    pub fn is_stable(&self, g: &MolGraph) -> bool {
        validate(g, &self.table).is_ok_and(|r| r.is_stable())
    }

    /// Checks per-arrow preconditions against `state` and sums the deltas.
    pub fn delta(&self, state: &State, arrows: &[Arrow]) -> Result<Delta, ApplyError> {
        let g = &state.graph;
        let mut delta = Delta::default();
        for &arrow in arrows {
            let idx = |m: u32| {
                state
                    .atom_index(m)
                    .ok_or(ApplyError::UnknownMap { arrow, map: m })
            };
            let bonded = |a: usize, b: usize, ma: u32, mb: u32| {
                if g.bond_order(a, b) >= 1 {
                    Ok(())
                } else {
                    Err(ApplyError::NoBond {
                        arrow,
                        a: ma,
                        b: mb,
                    })
                }
            };
            match arrow {
                Arrow::Attack(ma, mb) => {
                    let (a, b) = (idx(ma)?, idx(mb)?);
                    if g.lone_pairs(a) == 0 {
                        return Err(ApplyError::NoLonePair { arrow, map: ma });
                    }
                    delta.bond(a, b, 1);
                    delta.charge(a, 1);
                    delta.charge(b, -1);
                }
                Arrow::Ionize(ma, mb) => {
                    let (a, b) = (idx(ma)?, idx(mb)?);
                    bonded(a, b, ma, mb)?;
                    delta.bond(a, b, -1);
                    delta.charge(a, 1);
                    delta.charge(b, -1);
                }
                Arrow::BondAttack(ma, mb, mc) => {
                    if mc == ma || mc == mb {
                        return Err(ApplyError::DegenerateArrow { arrow });
                    }
                    let (a, b, c) = (idx(ma)?, idx(mb)?, idx(mc)?);
                    bonded(a, b, ma, mb)?;
                    delta.bond(a, b, -1);
                    delta.bond(b, c, 1);
                    delta.charge(a, 1);
                    delta.charge(c, -1);
                }
            }
        }
        Ok(delta)
    }

    /// Applies `arrows` as one atomic step; the result must be stable.
    pub fn apply(&self, state: &State, arrows: &[Arrow]) -> Result<State, ApplyError> {
        let next = self.apply_unchecked(state, arrows)?;
        let report = validate(&next.graph, &self.table).map_err(|e| match e {
            GraphError::UnknownElement(symbol) => ApplyError::UnknownElement { symbol },
            other => ApplyError::UnknownElement {
                symbol: other.to_string(),
            },
        })?;
        if !report.is_stable() {
            return Err(ApplyError::Unstable {
                violations: report.violations,
            });
        }
        Ok(next)
    }

    /// Applies `arrows` without the stability check (bond orders and charges
    /// must still be representable).
    pub fn apply_unchecked(&self, state: &State, arrows: &[Arrow]) -> Result<State, ApplyError> {
        let delta = self.delta(state, arrows)?;
        let mut g = state.graph.clone();
        let map_of = |i: usize| state.graph.atom(i).map.expect("state atoms are mapped");
        for (&(a, b), &d) in &delta.bonds {
            if d == 0 {
                continue;
            }
            let order = g.bond_order(a, b) as i32 + d;
            if order < 0 {
                return Err(ApplyError::NegativeBondOrder {
                    a: map_of(a),
                    b: map_of(b),
                });
            }
            if order > 3 {
                return Err(ApplyError::BondOrderOverflow {
                    a: map_of(a),
                    b: map_of(b),
                    order,
                });
            }
            g.set_bond_order(a, b, order as u8)
                .expect("indices from the same graph");
        }
        for (&a, &d) in &delta.charges {
            let q = g.atom(a).charge as i32 + d;
            g.atom_mut(a).charge =
                i8::try_from(q).map_err(|_| ApplyError::ChargeOverflow { map: map_of(a) })?;
        }
        Ok(State {
            graph: g,
            index: state.index.clone(),
        })
    }

    /// Binds a MechStep onto `state` and applies it. Returns the next state
    /// and the arrows in state map numbers.
    pub fn apply_step(
        &self,
        state: &State,
        step: &MechStep,
    ) -> Result<(State, Vec<Arrow>), StepError> {
        let arrows = bind_step(state, step)?;
        let next = self.apply(state, &arrows)?;
        Ok((next, arrows))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

/// A move that changed the atom inventory or the total charge.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("state {state}: {arrows:?} does not conserve {what}")]
pub struct ConservationError {
    pub state: usize,
    pub arrows: Vec<Arrow>,
    pub what: &'static str,
}

impl Engine {
    /// Applies every enumerated move of every state and checks that atoms
    /// and total charge are unchanged. Returns the number of moves checked.
    pub fn check_conservation(
        &self,
        states: &[State],
        max_arrows: usize,
        exec: crate::par::Exec,
    ) -> Result<usize, ConservationError> {
        let indexed: Vec<(usize, &State)> = states.iter().enumerate().collect();
        let counts = crate::par::map(exec, &indexed, |&(i, s)| {
            let formula = s.formula();
            let charge = s.graph.total_charge();
            let opts = EnumOptions {
                max_arrows,
                exec: crate::par::Exec::Sequential,
            };
            let moves = self.enumerate(s, &opts);
            for m in &moves {
                let fail = |what| ConservationError {
                    state: i,
                    arrows: m.arrows.clone(),
                    what,
                };
                let next = self.apply(s, &m.arrows).map_err(|_| fail("stability"))?;
                if next.formula() != formula {
                    return Err(fail("atoms"));
                }
                if next.graph.total_charge() != charge {
                    return Err(fail("charge"));
                }
            }
            Ok(moves.len())
        });
        counts.into_iter().sum()
    }
}

/// Thin alias of the default engine's stability check.
pub fn is_stable(g: &MolGraph) -> bool {
    Engine::default().is_stable(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechsmiles::parse_mechsmiles;

    const HYDRIDE_STEP: &str = "[BH3-:2][H:3].[CH:4](CCCC(C)=O)=[O:1]|((2, 3), 4);((4, 1), 1)";

    #[test]
    fn enumerated_moves_conserve() {
        let engine = Engine::default();
        let states: Vec<State> = ["[OH-].O", "C=O.[H-]", "CO.[H+]"]
            .iter()
            .map(|s| State::from_smiles(s).unwrap())
            .collect();
        let seq = engine.check_conservation(&states, 2, crate::par::Exec::Sequential);
        assert_eq!(seq, Ok(21 + 19 + 113));
        assert_eq!(engine.check_conservation(&states, 2, crate::par::Exec::Parallel), seq);
    }

    #[test]
    fn hydride_step_products() {
        let step = parse_mechsmiles(HYDRIDE_STEP).unwrap();
        let state = State::from_graph(&step.host).unwrap();
        let next = Engine::default().apply(&state, &step.arrows).unwrap();
        assert_eq!(next.component_keys(), vec!["B", "CC(=O)CCCC[O-]"]);
        assert_eq!(next.formula(), state.formula());
    }

    #[test]
    fn empty_arrow_set_is_identity() {
        let state = State::from_smiles("CC(=O)CCCC=O.O.[BH4-]").unwrap();
        assert_eq!(Engine::default().apply(&state, &[]).unwrap(), state);
    }

    #[test]
    fn proton_transfer() {
        let state = State::from_smiles("[OH-:1].[H:2][O:3][H:4]").unwrap();
        let e = Engine::default();
        let next = e
            .apply(&state, &[Arrow::Attack(1, 2), Arrow::Ionize(2, 3)])
            .unwrap();
        assert_eq!(next.component_keys(), vec!["O", "[OH-]"]);
        assert_eq!(next.formula(), state.formula());
        assert_eq!(next.formula().charge, -1);
        // H:2 now sits on O:1
        let o1 = next.atom_index(1).unwrap();
        let h2 = next.atom_index(2).unwrap();
        assert_eq!(next.graph().bond_order(o1, h2), 1);
        assert!(matches!(
            e.apply(&state, &[Arrow::Attack(1, 2), Arrow::Ionize(3, 2)]),
            Err(ApplyError::Unstable { .. })
        ));
    }

    #[test]
    fn precondition_errors_name_the_arrow() {
        let state = State::from_smiles("[CH4:1].[OH2:2]").unwrap();
        let e = Engine::default();
        assert!(matches!(
            e.apply(&state, &[Arrow::Attack(1, 2)]),
            Err(ApplyError::NoLonePair { map: 1, .. })
        ));
        assert!(matches!(
            e.apply(&state, &[Arrow::Ionize(1, 2)]),
            Err(ApplyError::NoBond { a: 1, b: 2, .. })
        ));
        assert!(matches!(
            e.apply(&state, &[Arrow::Attack(99, 2)]),
            Err(ApplyError::UnknownMap { map: 99, .. })
        ));
        let unstable = e.apply(&state, &[Arrow::Attack(2, 1)]).unwrap_err();
        assert!(unstable.to_string().contains("C:1"), "{unstable}");
    }

    #[test]
    fn state_maps_every_atom() {
        let state = State::from_smiles("[BH3-:2][H:3]").unwrap();
        assert_eq!(state.graph().atom_count(), 5);
        let mut maps: Vec<u32> = state
            .graph()
            .atoms()
            .iter()
            .map(|a| a.map.unwrap())
            .collect();
        maps.sort();
        assert_eq!(maps, vec![2, 3, 4, 5, 6]);
    }
}

//! Multi-step mechanisms and the unified JSONL record.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::{Engine, State, StateError, StepError};
use crate::mechsmiles::{parse_mechsmiles, Arrow, MechError, MechStep};
use crate::molgraph::{canonical_form, find_isomorphism, MolGraph};
use crate::smiles::{parse_smiles, MapMode};

/// Reaction products stated by the source rather than derived by replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredProducts {
    /// Every product species, by-products included (canonical keys).
    pub all: Vec<String>,
    /// Main product species (canonical keys).
    pub main: Vec<String>,
}

impl DeclaredProducts {
    pub fn from_smiles(all: &str, main: &str) -> Result<DeclaredProducts, StateError> {
        Ok(DeclaredProducts {
            all: species_keys(all)?,
            main: species_keys(main)?,
        })
    }
}

/// Canonical key of every component of a SMILES string, sorted.
pub fn species_keys(smiles: &str) -> Result<Vec<String>, StateError> {
    let g = parse_smiles(smiles)?;
    let mut keys: Vec<String> = g.split_components().iter().map(canonical_form).collect();
    keys.sort();
    Ok(keys)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("step {index}: {source}")]
    Step { index: usize, source: StepError },
    #[error("step {index}: {source}")]
    Parse { index: usize, source: MechError },
    #[error("initial state: {0}")]
    Initial(#[from] StateError),
    #[error("products: {0}")]
    Products(StateError),
}

/// Ordered elementary steps from an initial state. Step hosts and arrows use
/// the state's own map numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub reaction_id: String,
    pub initial: State,
    pub steps: Vec<MechStep>,
    /// `intermediates[i]` is the state after step `i`.
    pub intermediates: Vec<State>,
    pub declared: Option<DeclaredProducts>,
}

impl Mechanism {
    /// Replays arrow sets given in the initial state's map numbers.
    pub fn from_arrows(
        engine: &Engine,
        reaction_id: impl Into<String>,
        initial: State,
        arrow_sets: &[Vec<Arrow>],
    ) -> Result<Mechanism, MechanismError> {
        let mut steps = Vec::with_capacity(arrow_sets.len());
        let mut intermediates = Vec::with_capacity(arrow_sets.len());
        let mut cur = initial.clone();
        for (index, arrows) in arrow_sets.iter().enumerate() {
            let next = engine
                .apply(&cur, arrows)
                .map_err(|e| MechanismError::Step {
                    index,
                    source: e.into(),
                })?;
            steps.push(step_on(&cur, arrows));
            intermediates.push(next.clone());
            cur = next;
        }
        Ok(Mechanism {
            reaction_id: reaction_id.into(),
            initial,
            steps,
            intermediates,
            declared: None,
        })
    }

    /// Replays written MechSteps, binding each host into the running state.
    pub fn replay(
        engine: &Engine,
        reaction_id: impl Into<String>,
        initial: State,
        written: &[MechStep],
    ) -> Result<Mechanism, MechanismError> {
        let mut arrow_sets = Vec::with_capacity(written.len());
        let mut cur = initial.clone();
        for (index, step) in written.iter().enumerate() {
            let (next, arrows) = engine
                .apply_step(&cur, step)
                .map_err(|source| MechanismError::Step { index, source })?;
            arrow_sets.push(arrows);
            cur = next;
        }
        Mechanism::from_arrows(engine, reaction_id, initial, &arrow_sets)
    }

    pub fn with_declared(mut self, declared: DeclaredProducts) -> Mechanism {
        self.declared = Some(declared);
        self
    }

    pub fn goal(&self) -> &State {
        self.intermediates.last().unwrap_or(&self.initial)
    }

    /// Initial state followed by every intermediate.
    pub fn states(&self) -> Vec<&State> {
        std::iter::once(&self.initial)
            .chain(self.intermediates.iter())
            .collect()
    }

    pub fn arrow_sets(&self) -> Vec<Vec<Arrow>> {
        self.steps.iter().map(|s| s.arrows.clone()).collect()
    }

    /// Main product species keys: the declared ones, or else the largest
    /// final component not already present at the start.
    pub fn main_product(&self) -> Vec<String> {
        if let Some(d) = &self.declared {
            return d.main.clone();
        }
        let initial_keys = self.initial.component_keys();
        let finals: Vec<(usize, String)> = self
            .goal()
            .graph()
            .split_components()
            .iter()
            .map(|c| (c.heavy_atom_count(), canonical_form(c)))
            .collect();
        let pick = |pool: Vec<&(usize, String)>| {
            pool.into_iter()
                .min_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)))
                .map(|(_, k)| k.clone())
        };
        let fresh: Vec<&(usize, String)> = finals
            .iter()
            .filter(|(_, k)| !initial_keys.contains(k))
            .collect();
        pick(fresh)
            .or_else(|| pick(finals.iter().collect()))
            .into_iter()
            .collect()
    }

    /// Every product species: declared, or the final state's components.
    pub fn all_products(&self) -> Vec<String> {
        match &self.declared {
            Some(d) => d.all.clone(),
            None => self.goal().component_keys(),
        }
    }

    /// The same mechanism with map numbers reassigned as `State::from_smiles`
    /// would assign them to the map-free canonical initial SMILES.
    pub fn renumbered(&self, engine: &Engine) -> Result<Mechanism, MechanismError> {
        let canon = State::from_smiles(&self.initial.smiles(&MapMode::None))?;
        let a = self.initial.graph();
        let b = canon.graph();
        let iso = find_isomorphism(a, b, &|_| None).expect("canonical SMILES is isomorphic");
        let remap: HashMap<u32, u32> = iso
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                (
                    a.atom(i).map.expect("mapped"),
                    b.atom(j).map.expect("mapped"),
                )
            })
            .collect();
        let sets: Vec<Vec<Arrow>> = self
            .steps
            .iter()
            .map(|s| s.arrows.iter().map(|x| x.remap(|m| remap[&m])).collect())
            .collect();
        let mut out = Mechanism::from_arrows(engine, self.reaction_id.clone(), canon, &sets)?;
        out.declared = self.declared.clone();
        Ok(out)
    }

    /// JSONL record; steps are written in the maps of [`Mechanism::renumbered`]
    /// so that reading the record back reproduces them exactly.
    pub fn to_record(&self, source_format: &str) -> MechanismRecord {
        let engine = Engine::default();
        let this = self.renumbered(&engine).unwrap_or_else(|_| self.clone());
        this.record_as_is(source_format)
    }

    fn record_as_is(&self, source_format: &str) -> MechanismRecord {
        let mut meta = Map::new();
        if let Some(d) = &self.declared {
            meta.insert("products".into(), Value::String(d.all.join(".")));
            meta.insert("main_product".into(), Value::String(d.main.join(".")));
        }
        MechanismRecord {
            reaction_id: self.reaction_id.clone(),
            initial_smiles: self.initial.smiles(&MapMode::None),
            steps: self.steps.iter().map(MechStep::to_minimal).collect(),
            source_format: source_format.to_string(),
            meta: Value::Object(meta),
        }
    }
}

/// Minimal MechStep for `arrows` on `state`.
pub fn step_on(state: &State, arrows: &[Arrow]) -> MechStep {
    let maps: Vec<u32> = arrows.iter().flat_map(|a| a.maps()).collect();
    let host: MolGraph = state.components_with(&maps);
    MechStep::new(host, arrows.to_vec())
}

/// Unified JSONL mechanism record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismRecord {
    pub reaction_id: String,
    pub initial_smiles: String,
    pub steps: Vec<String>,
    pub source_format: String,
    #[serde(default)]
    pub meta: Value,
}

impl MechanismRecord {
    pub fn to_mechanism(&self, engine: &Engine) -> Result<Mechanism, MechanismError> {
        let initial = State::from_smiles(&self.initial_smiles)?;
        let written = self
            .steps
            .iter()
            .enumerate()
            .map(|(index, s)| {
                parse_mechsmiles(s).map_err(|source| MechanismError::Parse { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut mech = Mechanism::replay(engine, self.reaction_id.clone(), initial, &written)?;
        let products = self.meta.get("products").and_then(Value::as_str);
        let main = self.meta.get("main_product").and_then(Value::as_str);
        if let (Some(all), Some(main)) = (products, main) {
            mech.declared =
                Some(DeclaredProducts::from_smiles(all, main).map_err(MechanismError::Products)?);
        }
        Ok(mech)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn borohydride() -> Mechanism {
        let record = MechanismRecord {
            reaction_id: "r1".into(),
            initial_smiles: "CC(=O)CCCC=O.O.O.[BH4-].[BH4-]".into(),
            steps: vec![
                "[BH3-:2][H:3].[CH:4](CCCC(C)=O)=[O:1]|((2, 3), 4);((4, 1), 1)".into(),
                "[O-:1][CH2:4]CCCC(C)=O.[H:5][OH:6]|(1,5);((5,6),6)".into(),
            ],
            source_format: "curated".into(),
            meta: Value::Null,
        };
        record.to_mechanism(&Engine::default()).unwrap()
    }

    #[test]
    fn replay_and_products() {
        let m = borohydride();
        assert_eq!(m.intermediates.len(), 2);
        assert_eq!(
            m.goal().component_keys(),
            vec!["B", "CC(=O)CCCCO", "O", "[BH4-]", "[OH-]"]
        );
        assert_eq!(m.main_product(), vec!["CC(=O)CCCCO"]);
        assert_eq!(m.goal().formula(), m.initial.formula());
    }

    #[test]
    fn record_round_trip_is_stable() {
        let m = borohydride();
        let rec = m.to_record("curated");
        let again = rec
            .to_mechanism(&Engine::default())
            .unwrap()
            .to_record("curated");
        assert_eq!(rec, again);
        for (a, b) in m
            .states()
            .iter()
            .zip(again.to_mechanism(&Engine::default()).unwrap().states())
        {
            assert_eq!(a.canonical(), b.canonical());
        }
    }
}

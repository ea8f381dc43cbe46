//! Built-in mechanisms and a random-walk mechanism generator.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Engine, State};
use crate::mechanism::{Mechanism, MechanismError, MechanismRecord};
use crate::par::{self, Exec};

const CURATED: &str = include_str!("../data/curated.jsonl");

/// Hand-written mechanisms shipped with the crate.
pub fn curated(engine: &Engine) -> Vec<Mechanism> {
    CURATED
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: MechanismRecord = serde_json::from_str(l).expect("curated record parses");
            rec.to_mechanism(engine).expect("curated record replays")
        })
        .collect()
}

pub fn curated_by_id(engine: &Engine, id: &str) -> Option<Mechanism> {
    curated(engine).into_iter().find(|m| m.reaction_id == id)
}

/// Small reactive systems used as random-walk starting points.
pub const SEEDS: &[&str] = &[
    "CC(=O)CCCC=O.O.O.[BH4-].[BH4-]",
    "CC=O.[OH-]",
    "CC(C)=O.[OH-].O",
    "CC(=O)Cl.N",
    "CC(=O)OC.[OH-]",
    "CBr.[OH-]",
    "CCBr.[NH2-]",
    "C=CC=O.[C-]#N",
    "CCO.[H+]",
    "CC(=O)O.N",
    "CC#N.[OH-]",
    "O=C=O.[OH-]",
    "CS(=O)(=O)Cl.CCO",
    "C=C.Br",
    "CCN.CC(=O)Cl",
    "OC1=CC=CC=C1.[OH-]",
    "CC(=O)CC(C)=O.[O-]C",
    "NC(=O)CCl.C1CNCCN1",
];

#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub count: usize,
    pub max_steps: usize,
    pub max_arrows: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            count: 1000,
            max_steps: 3,
            max_arrows: 3,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// Random mechanisms of 1..=`max_steps` legal moves from the seed systems.
/// Walks never return to a state they already visited. Deterministic for a given seed regardless of execution mode.
pub fn synthesize(engine: &Engine, opts: &SynthOptions) -> Vec<Mechanism> {
    let seeds: Vec<State> = SEEDS
        .iter()
        .map(|s| State::from_smiles(s).expect("seed parses"))
        .collect();
    let ids: Vec<usize> = (0..opts.count).collect();
    par::map(opts.exec, &ids, |&i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64));
        loop {
            if let Ok(Some(m)) = random_walk(engine, &seeds, opts, &mut rng, format!("syn-{i:06}"))
            {
                return m;
            }
        }
    })
}

fn random_walk<R: Rng>(
    engine: &Engine,
    seeds: &[State],
    opts: &SynthOptions,
    rng: &mut R,
    id: String,
) -> Result<Option<Mechanism>, MechanismError> {
    let start = seeds.choose(rng).expect("seeds").clone();
    let steps = rng.random_range(1..=opts.max_steps.max(1));
    let mut cur = start.clone();
    let mut sets = Vec::with_capacity(steps);
    let mut seen = HashSet::from([start.canonical()]);
    for _ in 0..steps {
        let Some(mv) = engine.sample_move(&cur, opts.max_arrows, 64, rng) else {
            break;
        };
        let next = match engine.apply(&cur, &mv.arrows) {
            Ok(s) => s,
            Err(_) => break,
        };
        if !seen.insert(next.canonical()) {
            break;
        }
        cur = next;
        sets.push(mv.arrows);
    }
    if sets.is_empty() {
        return Ok(None);
    }
    Mechanism::from_arrows(engine, id, start, &sets).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curated_replays() {
        let engine = Engine::default();
        let all = curated(&engine);
        assert_eq!(all.len(), 6);
        let boro = curated_by_id(&engine, "borohydride-reduction").unwrap();
        assert_eq!(
            boro.goal().component_keys(),
            vec!["B", "B", "CC(O)CCCCO", "[OH-]", "[OH-]"]
        );
        for m in &all {
            assert_eq!(m.initial.formula(), m.goal().formula(), "{}", m.reaction_id);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let engine = Engine::default();
        let opts = SynthOptions {
            count: 20,
            seed: 3,
            ..Default::default()
        };
        let a = synthesize(
            &engine,
            &SynthOptions {
                exec: Exec::Sequential,
                ..opts
            },
        );
        let b = synthesize(
            &engine,
            &SynthOptions {
                exec: Exec::Parallel,
                ..opts
            },
        );
        assert_eq!(a, b);
        assert!(a.iter().all(|m| !m.steps.is_empty()));
    }
}

mod common;

use std::collections::BTreeSet;

use arrowpush::corpus::{self, SynthOptions, SEEDS};
use arrowpush::engine::{EnumOptions, Engine, State};
use arrowpush::mechanism::step_on;
use arrowpush::mechsmiles::{parse_mechsmiles, Scope};
use arrowpush::molgraph::{canonical_form, find_isomorphism, Formula, MolGraph};
use arrowpush::par::Exec;
use arrowpush::smiles::{parse_smiles, write_smiles, MapMode};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

const SMALL: &[&str] = &["[OH-].O", "C=O.[H-]", "[NH4+].[OH-]", "CO.[H+]", "C=O.[OH-]", "[H+].[F-]", "N.[H+]", "O=O"];

#[test]
fn enumeration_matches_brute_force_on_small_states() {
    let engine = Engine::default();
    for s in SMALL {
        let state = State::from_smiles(s).unwrap();
        assert!(state.graph().atom_count() <= 8, "{s}");
        for max_arrows in 1..=2 {
            let fast: BTreeSet<_> = engine
                .enumerate(&state, &EnumOptions { max_arrows, exec: Exec::Sequential })
                .into_iter()
                .map(|m| m.arrows)
                .collect();
            let slow = brute_force_moves(&engine, &state, max_arrows);
            assert_eq!(fast, slow, "{s} at {max_arrows} arrows");
        }
    }
}

#[test]
fn enumeration_matches_brute_force_at_three_arrows() {
    let engine = Engine::default();
    for s in ["[OH-].O", "[H+].[F-]", "C=O.[H-]"] {
        let state = State::from_smiles(s).unwrap();
        let fast: BTreeSet<_> = engine
            .enumerate(&state, &EnumOptions { max_arrows: 3, exec: Exec::Sequential })
            .into_iter()
            .map(|m| m.arrows)
            .collect();
        assert_eq!(fast, brute_force_moves(&engine, &state, 3), "{s}");
    }
}

#[test]
fn enumerated_moves_all_apply() {
    let engine = Engine::default();
    for s in SEEDS.iter().take(6) {
        let state = State::from_smiles(s).unwrap();
        for m in engine.enumerate(&state, &EnumOptions { max_arrows: 2, ..Default::default() }) {
            assert!(engine.apply(&state, &m.arrows).is_ok(), "{s}: {:?}", m.arrows);
        }
    }
}

#[test]
fn parallel_and_sequential_enumeration_agree() {
    let engine = Engine::default();
    let state = State::from_smiles(SEEDS[0]).unwrap();
    let a = engine.enumerate(&state, &EnumOptions { max_arrows: 2, exec: Exec::Sequential });
    let b = engine.enumerate(&state, &EnumOptions { max_arrows: 2, exec: Exec::Parallel });
    assert_eq!(a, b);
}

#[test]
fn inferred_arrows_are_equivalent_and_minimal() {
    let engine = Engine::default();
    for (i, case) in random_steps(&engine, 120, 11).iter().enumerate() {
        match check_inference(&engine, case) {
            InferOutcome::Ok => {}
            InferOutcome::Failed(e) => panic!("case {i} {:?}: {e}", case.arrows),
            InferOutcome::NotMinimal(set) => panic!("case {i}: {set:?} beats the inferred set"),
        }
    }
}

/// Isomorphism by trying every atom permutation; for tiny graphs only.
fn isomorphic_by_permutation(a: &MolGraph, b: &MolGraph) -> bool {
    let n = a.atom_count();
    if n != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    let same_atom = |i: usize, j: usize| {
        let (x, y) = (a.atom(i), b.atom(j));
        x.element == y.element && x.charge == y.charge && a.total_h(i) == b.total_h(j)
    };
    fn extend(a: &MolGraph, b: &MolGraph, perm: &mut Vec<usize>, used: &mut [bool], same: &dyn Fn(usize, usize) -> bool) -> bool {
        let i = perm.len();
        if i == a.atom_count() {
            return true;
        }
        for j in 0..b.atom_count() {
            if used[j] || !same(i, j) {
                continue;
            }
            if (0..i).any(|k| a.bond_order(k, i) != b.bond_order(perm[k], j)) {
                continue;
            }
            used[j] = true;
            perm.push(j);
            if extend(a, b, perm, used, same) {
                return true;
            }
            perm.pop();
            used[j] = false;
        }
        false
    }
    extend(a, b, &mut Vec::new(), &mut vec![false; n], &same_atom)
}

#[test]
fn canonical_keys_agree_with_permutation_isomorphism() {
    let pool = [
        "CCO", "OCC", "COC", "CC=O", "C=CO", "OC=C", "C1CC1", "C=CC", "CC(C)O", "CCCO", "OC(C)C", "C[O-]", "[O-]C",
        "NC=O", "O=CN", "C#N", "[C-]#N", "N#C", "CC(=O)O", "OC(C)=O", "CC([O-])=O", "C1CCOC1", "O1CCCC1",
    ];
    let graphs: Vec<MolGraph> = pool.iter().map(|s| parse_smiles(s).unwrap()).collect();
    for (i, a) in graphs.iter().enumerate() {
        for (j, b) in graphs.iter().enumerate() {
            let truth = isomorphic_by_permutation(a, b);
            assert_eq!(canonical_form(a) == canonical_form(b), truth, "{} vs {}", pool[i], pool[j]);
            assert_eq!(find_isomorphism(a, b, &|_| None).is_some(), truth, "{} vs {}", pool[i], pool[j]);
        }
    }
}

fn permuted(g: &MolGraph, seed: u64) -> MolGraph {
    let mut order: Vec<usize> = (0..g.atom_count()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    g.subgraph(&order)
}

fn walk(seed_index: usize, steps: usize, rng_seed: u64) -> Vec<State> {
    let engine = Engine::default();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut state = State::from_smiles(SEEDS[seed_index]).unwrap();
    let mut out = vec![state.clone()];
    for _ in 0..steps {
        let Some(mv) = engine.sample_move(&state, 3, 64, &mut rng) else {
            break;
        };
        state = engine.apply(&state, &mv.arrows).unwrap();
        out.push(state.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moves_conserve_atoms_and_charge(seed in 0..SEEDS.len(), rng in any::<u64>()) {
        let states = walk(seed, 4, rng);
        let f0 = states[0].formula();
        for s in &states[1..] {
            prop_assert_eq!(&s.formula(), &f0);
            prop_assert_eq!(s.graph().total_charge(), states[0].graph().total_charge());
        }
    }

    #[test]
    fn canonical_form_ignores_atom_order(seed in 0..SEEDS.len(), rng in any::<u64>(), shuffle in any::<u64>()) {
        for s in walk(seed, 2, rng) {
            let g = s.graph();
            prop_assert_eq!(canonical_form(g), canonical_form(&permuted(g, shuffle)));
        }
    }

    #[test]
    fn formulas_add_over_components(a in 0..SEEDS.len(), b in 0..SEEDS.len()) {
        let ga = parse_smiles(SEEDS[a]).unwrap();
        let gb = parse_smiles(SEEDS[b]).unwrap();
        let mut sum = Formula::default();
        sum.add(&ga.formula());
        sum.add(&gb.formula());
        prop_assert_eq!(ga.union(&gb).formula(), sum.clone());
        let joined = parse_smiles(&format!("{}.{}", SEEDS[a], SEEDS[b])).unwrap();
        prop_assert_eq!(joined.formula(), sum);
    }

    #[test]
    fn smiles_write_parse_write_is_stable(seed in 0..SEEDS.len(), rng in any::<u64>()) {
        for s in walk(seed, 3, rng) {
            for mode in [MapMode::All, MapMode::None] {
                let text = write_smiles(s.graph(), &mode);
                let again = write_smiles(&parse_smiles(&text).unwrap(), &mode);
                prop_assert_eq!(&again, &text);
            }
        }
    }

    #[test]
    fn mechsmiles_serialize_parse_serialize_is_stable(seed in 0..SEEDS.len(), rng in any::<u64>()) {
        let states = walk(seed, 1, rng);
        prop_assume!(states.len() == 2);
        let engine = Engine::default();
        let moves = engine.enumerate(&states[0], &EnumOptions { max_arrows: 2, exec: Exec::Sequential });
        for m in moves.iter().step_by(moves.len() / 8 + 1) {
            let step = step_on(&states[0], &m.arrows);
            for scope in [Scope::Minimal, Scope::Equilibrated] {
                let text = step.serialize(scope);
                let back = parse_mechsmiles(&text).unwrap();
                prop_assert_eq!(back.serialize(scope), text.clone());
                let (next, _) = engine.apply_step(&states[0], &back).unwrap();
                prop_assert_eq!(next.canonical(), engine.apply(&states[0], &m.arrows).unwrap().canonical());
            }
        }
    }
}

#[test]
fn synthetic_corpus_replays() {
    let engine = Engine::default();
    let mechs = corpus::synthesize(&engine, &SynthOptions { count: 200, seed: 3, ..Default::default() });
    for m in &mechs {
        let record = m.to_record("synthetic");
        let back = record.to_mechanism(&engine).unwrap();
        assert_eq!(back.goal().canonical(), m.goal().canonical());
        assert_eq!(back.initial.formula(), back.goal().formula());
    }
}

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use arrowpush::convert::{infer_arrows, InferOptions};
use arrowpush::corpus::SEEDS;
use arrowpush::engine::{Engine, State};
use arrowpush::mechsmiles::Arrow;
use arrowpush::molgraph::validate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bond orders and charges keyed by map number.
pub type Signature = (BTreeMap<(u32, u32), u8>, BTreeMap<u32, i8>);

pub fn signature(s: &State) -> Signature {
    let g = s.graph();
    let map = |i: usize| g.atom(i).map.unwrap();
    let bonds = g
        .bonds()
        .filter(|(_, b)| b.order > 0)
        .map(|((a, b), bond)| ((map(a).min(map(b)), map(a).max(map(b))), bond.order))
        .collect();
    let charges = (0..g.atom_count()).map(|i| (map(i), g.atom(i).charge)).collect();
    (bonds, charges)
}

/// Every single arrow over `maps` whose preconditions hold in `s`.
pub fn arrows_over(s: &State, maps: &[u32]) -> Vec<Arrow> {
    let g = s.graph();
    let idx = |m: u32| s.atom_index(m).unwrap();
    let mut out = Vec::new();
    for &a in maps {
        for &b in maps {
            if a == b {
                continue;
            }
            if g.lone_pairs(idx(a)) > 0 {
                out.push(Arrow::Attack(a, b));
            }
            if g.bond_order(idx(a), idx(b)) > 0 {
                out.push(Arrow::Ionize(a, b));
                for &c in maps {
                    if c != a && c != b {
                        out.push(Arrow::BondAttack(a, b, c));
                    }
                }
            }
        }
    }
    out
}

fn all_maps(s: &State) -> Vec<u32> {
    s.graph().atoms().iter().map(|a| a.map.unwrap()).collect()
}

fn unstable(engine: &Engine, s: &State) -> Option<BTreeSet<u32>> {
    let report = validate(s.graph(), &engine.table).ok()?;
    Some(report.violations.iter().map(|v| s.graph().atom(v.atom).map.unwrap()).collect())
}

/// Moves by brute force over ordered arrow tuples. A tuple counts when each
/// arrow after the first leaves the previous arrow's sink along one of its
/// bonds, every proper prefix leaves that sink as the only unstable atom,
/// and the whole tuple gives a stable, different state without repeating
/// an arrow.
pub fn brute_force_moves(engine: &Engine, s: &State, max_arrows: usize) -> BTreeSet<Vec<Arrow>> {
    let singles = arrows_over(s, &all_maps(s));
    let base = signature(s);
    let mut found = BTreeSet::new();
    let mut stack: Vec<Vec<Arrow>> = singles.iter().map(|a| vec![*a]).collect();
    while let Some(tuple) = stack.pop() {
        let Ok(next) = engine.apply_unchecked(s, &tuple) else {
            continue;
        };
        let Some(bad) = unstable(engine, &next) else {
            continue;
        };
        let last = *tuple.last().unwrap();
        if bad.is_empty() {
            let mut set = tuple.clone();
            set.sort_unstable();
            set.dedup();
            if set.len() == tuple.len() && signature(&next) != base {
                found.insert(set);
            }
            continue;
        }
        if tuple.len() == max_arrows || bad != BTreeSet::from([last.sink()]) {
            continue;
        }
        for a in &singles {
            let follows = match a {
                Arrow::Attack(..) => false,
                Arrow::Ionize(x, _) | Arrow::BondAttack(x, _, _) => *x == last.sink(),
            };
            if follows {
                let mut t = tuple.clone();
                t.push(*a);
                stack.push(t);
            }
        }
    }
    found
}

/// Atoms whose bonds or charge differ between the two states.
pub fn changed_maps(a: &State, b: &State) -> Vec<u32> {
    let (ba, qa) = signature(a);
    let (bb, qb) = signature(b);
    let mut out = BTreeSet::new();
    for k in ba.keys().chain(bb.keys()) {
        if ba.get(k) != bb.get(k) {
            out.insert(k.0);
            out.insert(k.1);
        }
    }
    for (m, q) in &qa {
        if qb.get(m) != Some(q) {
            out.insert(*m);
        }
    }
    out.into_iter().collect()
}

/// A valid arrow set over the changed atoms with fewer than `k` arrows that
/// reproduces `product`, if one exists.
pub fn smaller_solution(engine: &Engine, s: &State, product: &State, k: usize) -> Option<Vec<Arrow>> {
    let target = signature(product);
    let singles = arrows_over(s, &changed_maps(s, product));
    let check = |set: &[Arrow]| engine.apply(s, set).is_ok_and(|n| signature(&n) == target);
    for (i, a) in singles.iter().enumerate() {
        if k > 1 && check(&[*a]) {
            return Some(vec![*a]);
        }
        if k > 2 {
            for b in &singles[i + 1..] {
                if check(&[*a, *b]) {
                    return Some(vec![*a, *b]);
                }
            }
        }
    }
    None
}

pub struct InferCase {
    pub state: State,
    pub arrows: Vec<Arrow>,
    pub product: State,
}

/// `n` random legal moves of one to three arrows drawn along random walks
/// from the seed systems.
pub fn random_steps(engine: &Engine, n: usize, seed: u64) -> Vec<InferCase> {
    let seeds: Vec<State> = SEEDS.iter().map(|s| State::from_smiles(s).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut state = seeds.choose(&mut rng).unwrap().clone();
        for _ in 0..rng.random_range(0..3) {
            match engine.sample_move(&state, 3, 64, &mut rng) {
                Some(mv) => state = engine.apply(&state, &mv.arrows).unwrap(),
                None => break,
            }
        }
        let Some(mv) = engine.sample_move(&state, 3, 64, &mut rng) else {
            continue;
        };
        let product = engine.apply(&state, &mv.arrows).unwrap();
        out.push(InferCase { state, arrows: mv.arrows, product });
    }
    out
}

pub enum InferOutcome {
    Ok,
    Failed(String),
    NotMinimal(Vec<Arrow>),
}

/// Infers arrows for one case and checks product equivalence and minimality.
pub fn check_inference(engine: &Engine, case: &InferCase) -> InferOutcome {
    let inferred = match infer_arrows(engine, case.state.graph(), case.product.graph(), &InferOptions::default()) {
        Ok(x) => x,
        Err(e) => return InferOutcome::Failed(e.to_string()),
    };
    match engine.apply(&inferred.reactant, &inferred.arrows) {
        Ok(p) if signature(&p) == signature(&case.product) => {}
        Ok(_) => return InferOutcome::Failed("different product".into()),
        Err(e) => return InferOutcome::Failed(e.to_string()),
    }
    if inferred.arrows.len() > case.arrows.len() {
        return InferOutcome::NotMinimal(case.arrows.clone());
    }
    match smaller_solution(engine, &case.state, &case.product, inferred.arrows.len()) {
        Some(set) => InferOutcome::NotMinimal(set),
        None => InferOutcome::Ok,
    }
}

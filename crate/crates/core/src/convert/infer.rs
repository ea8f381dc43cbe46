//! Arrow inference from mapped reactant/product pairs, and segmentation of
//! flat arrow lists into elementary steps.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ConvertError;
use crate::engine::{Engine, State};
use crate::mechsmiles::Arrow;
use crate::molgraph::MolGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferOptions {
    /// Largest arrow set searched.
    pub max_arrows: usize,
    /// Candidate sets kept per size before the stability check.
    pub max_solutions: usize,
    /// Hydrogen pools up to this size are tried under every pairing.
    pub max_pool: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            max_arrows: 6,
            max_solutions: 200,
            max_pool: 4,
        }
    }
}

/// Result of [`infer_arrows`]: arrows use the maps of `reactant`, which
/// carries a fresh map on every hydrogen that had none.
#[derive(Debug, Clone, PartialEq)]
pub struct Inferred {
    pub reactant: State,
    pub product: State,
    pub arrows: Vec<Arrow>,
}

/// Minimal arrow set turning `reactant` into `product`. Heavy atoms must be
/// mapped on both sides; unmapped hydrogens are paired by parent atom.
pub fn infer_arrows(
    engine: &Engine,
    reactant: &MolGraph,
    product: &MolGraph,
    opts: &InferOptions,
) -> Result<Inferred, ConvertError> {
    for (side, g) in [("reactant", reactant), ("product", product)] {
        if let Some(i) = (0..g.atom_count())
            .find(|&i| !g.atom(i).element.is_hydrogen() && g.atom(i).map.is_none())
        {
            return Err(ConvertError::UnmappedAtom {
                side,
                element: g.atom(i).element.symbol().to_string(),
            });
        }
    }
    let r = State::from_graph(reactant).map_err(|e| ConvertError::Graph(e.to_string()))?;
    let p = product.with_explicit_hydrogens();
    let rg = r.graph();

    let heavy_maps = |g: &MolGraph| -> BTreeMap<u32, usize> {
        (0..g.atom_count())
            .filter(|&i| !g.atom(i).element.is_hydrogen())
            .map(|i| (g.atom(i).map.expect("checked"), i))
            .collect()
    };
    let rh = heavy_maps(rg);
    let ph = heavy_maps(&p);
    if rh.len() != ph.len() || rh.keys().ne(ph.keys()) {
        return Err(ConvertError::MapMismatch);
    }
    for (m, &i) in &rh {
        if rg.atom(i).element != p.atom(ph[m]).element {
            return Err(ConvertError::ElementMismatch { map: *m });
        }
    }

    // hydrogens grouped by their heavy parent (None for free hydrogens)
    let parent = |g: &MolGraph, h: usize| -> Option<u32> {
        g.neighbors(h)
            .find(|&n| !g.atom(n).element.is_hydrogen())
            .and_then(|n| g.atom(n).map)
    };
    let input_maps = reactant.max_map();
    let r_h: Vec<usize> = (0..rg.atom_count())
        .filter(|&i| rg.atom(i).element.is_hydrogen())
        .collect();
    let p_h: Vec<usize> = (0..p.atom_count())
        .filter(|&i| p.atom(i).element.is_hydrogen())
        .collect();
    if r_h.len() != p_h.len() {
        return Err(ConvertError::HydrogenImbalance {
            reactant: r_h.len(),
            product: p_h.len(),
        });
    }

    // product H index -> reactant H map
    let mut fixed: HashMap<usize, u32> = HashMap::new();
    let mut used: HashSet<u32> = HashSet::new();
    for &h in &p_h {
        if let Some(m) = p.atom(h).map {
            let known = m <= input_maps
                && r.atom_index(m)
                    .is_some_and(|i| rg.atom(i).element.is_hydrogen());
            if known && used.insert(m) {
                fixed.insert(h, m);
            }
        }
    }
    let mut r_groups: BTreeMap<Option<u32>, Vec<u32>> = BTreeMap::new();
    for &h in &r_h {
        let m = rg.atom(h).map.expect("state atoms are mapped");
        if !used.contains(&m) {
            r_groups.entry(parent(rg, h)).or_default().push(m);
        }
    }
    let mut p_groups: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
    for &h in &p_h {
        if !fixed.contains_key(&h) {
            p_groups.entry(parent(&p, h)).or_default().push(h);
        }
    }
    let mut pool: Vec<(Option<u32>, u32)> = Vec::new();
    let mut slots: Vec<usize> = Vec::new();
    let keys: Vec<Option<u32>> = r_groups.keys().chain(p_groups.keys()).copied().collect();
    let mut seen = HashSet::new();
    for key in keys {
        if !seen.insert(key) {
            continue;
        }
        let mut rs = r_groups.get(&key).cloned().unwrap_or_default();
        let ps = p_groups.get(&key).cloned().unwrap_or_default();
        rs.sort_unstable();
        let keep = rs.len().min(ps.len());
        // free hydrogens are only kept when their bonding is unchanged
        let keep = if key.is_none() { 0 } else { keep };
        for (h, m) in ps.iter().zip(&rs).take(keep) {
            fixed.insert(*h, *m);
        }
        pool.extend(rs[keep..].iter().map(|&m| (key, m)));
        slots.extend(ps[keep..].iter().copied());
    }

    let pairings = pairings(&pool, opts.max_pool);
    let mut best: Option<(Vec<Arrow>, State)> = None;
    for pairing in pairings {
        let mut assign = fixed.clone();
        for (slot, &(_, m)) in slots.iter().zip(&pairing) {
            assign.insert(*slot, m);
        }
        let mut pg = p.clone();
        for (&h, &m) in &assign {
            pg.atom_mut(h).map = Some(m);
        }
        let target = State::from_graph(&pg).map_err(|e| ConvertError::Graph(e.to_string()))?;
        if let Some(arrows) = search(engine, &r, &target, opts, best.as_ref().map(|b| b.0.len())) {
            let better = match &best {
                None => true,
                Some((b, _)) => (arrows.len(), &arrows) < (b.len(), b),
            };
            if better {
                best = Some((arrows, target));
            }
        }
    }
    match best {
        Some((arrows, product)) => Ok(Inferred {
            reactant: r,
            product,
            arrows,
        }),
        None => Err(ConvertError::NoArrowSet {
            bound: opts.max_arrows,
        }),
    }
}

/// Pool orderings to try: every distinct arrangement by parent when the
/// pool is small, else the sorted order only.
fn pairings(pool: &[(Option<u32>, u32)], max_pool: usize) -> Vec<Vec<(Option<u32>, u32)>> {
    if pool.len() > max_pool || pool.len() <= 1 {
        return vec![pool.to_vec()];
    }
    let mut out: Vec<Vec<(Option<u32>, u32)>> = Vec::new();
    let mut seen: HashSet<Vec<Option<u32>>> = HashSet::new();
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    permute(&mut idx, 0, &mut |perm| {
        let v: Vec<(Option<u32>, u32)> = perm.iter().map(|&i| pool[i]).collect();
        if seen.insert(v.iter().map(|x| x.0).collect()) {
            out.push(v);
        }
    });
    out
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

type Pair = (usize, usize);

struct Search<'a> {
    g: &'a MolGraph,
    maps: Vec<u32>,
    found: Vec<Vec<Arrow>>,
    cap: usize,
}

fn key(a: usize, b: usize) -> Pair {
    (a.min(b), a.max(b))
}

fn bump(bonds: &mut BTreeMap<Pair, i32>, a: usize, b: usize, d: i32) {
    let k = key(a, b);
    let v = bonds.entry(k).or_insert(0);
    *v += d;
    if *v == 0 {
        bonds.remove(&k);
    }
}

/// Index-level arrow for the search.
#[derive(Clone, Copy)]
enum Cand {
    Attack(usize, usize),
    Ionize(usize, usize),
    BondAttack(usize, usize, usize),
}

impl Search<'_> {
    fn arrow(&self, c: Cand) -> Arrow {
        let m = |i: usize| self.maps[i];
        match c {
            Cand::Attack(a, b) => Arrow::Attack(m(a), m(b)),
            Cand::Ionize(a, b) => Arrow::Ionize(m(a), m(b)),
            Cand::BondAttack(a, b, c) => Arrow::BondAttack(m(a), m(b), m(c)),
        }
    }

    /// Remaining deltas after taking `c` (remaining = target - applied).
    fn take(c: Cand, bonds: &mut BTreeMap<Pair, i32>, dq: &mut [i32]) {
        match c {
            Cand::Attack(a, b) => {
                bump(bonds, a, b, -1);
                dq[a] -= 1;
                dq[b] += 1;
            }
            Cand::Ionize(a, b) => {
                bump(bonds, a, b, 1);
                dq[a] -= 1;
                dq[b] += 1;
            }
            Cand::BondAttack(a, b, c) => {
                bump(bonds, a, b, 1);
                bump(bonds, b, c, -1);
                dq[a] -= 1;
                dq[c] += 1;
            }
        }
    }

    fn candidates(&self, bonds: &BTreeMap<Pair, i32>) -> Vec<Cand> {
        let (&(a, b), &d) = bonds.iter().next().expect("non-empty");
        let mut out = Vec::new();
        let neg = |x: usize, y: usize| bonds.get(&key(x, y)).is_some_and(|&v| v < 0);
        let pos = |x: usize, y: usize| bonds.get(&key(x, y)).is_some_and(|&v| v > 0);
        let partners = |x: usize| -> Vec<usize> {
            let mut v: Vec<usize> = bonds
                .keys()
                .filter_map(|&(p, q)| {
                    if p == x {
                        Some(q)
                    } else if q == x {
                        Some(p)
                    } else {
                        None
                    }
                })
                .collect();
            v.sort_unstable();
            v
        };
        if d > 0 {
            for (x, y) in [(a, b), (b, a)] {
                if self.g.lone_pairs(x) > 0 {
                    out.push(Cand::Attack(x, y));
                }
                // bond x-z released toward y
                for z in partners(x) {
                    if z != y && neg(z, x) {
                        out.push(Cand::BondAttack(z, x, y));
                    }
                }
            }
        } else {
            for (x, y) in [(a, b), (b, a)] {
                out.push(Cand::Ionize(x, y));
                for z in partners(y) {
                    if z != x && pos(y, z) {
                        out.push(Cand::BondAttack(x, y, z));
                    }
                }
            }
        }
        out
    }

    fn dfs(
        &mut self,
        left: usize,
        bonds: &mut BTreeMap<Pair, i32>,
        dq: &mut [i32],
        chosen: &mut Vec<Arrow>,
    ) {
        if self.found.len() >= self.cap {
            return;
        }
        if bonds.is_empty() {
            if dq.iter().all(|&q| q == 0) {
                let mut set = chosen.clone();
                set.sort_unstable();
                self.found.push(set);
            }
            return;
        }
        let bond_total: i32 = bonds.values().map(|v| v.abs()).sum();
        let charge_total: i32 = dq.iter().map(|v| v.abs()).sum();
        if left == 0 || bond_total > 2 * left as i32 || charge_total > 2 * left as i32 {
            return;
        }
        for c in self.candidates(bonds) {
            let arrow = self.arrow(c);
            if chosen.contains(&arrow) {
                continue;
            }
            let mut nb = bonds.clone();
            let mut nq = dq.to_vec();
            Search::take(c, &mut nb, &mut nq);
            chosen.push(arrow);
            self.dfs(left - 1, &mut nb, &mut nq, chosen);
            chosen.pop();
        }
    }
}

/// Smallest arrow set (lexicographically first among equals) that applies
/// to `r` and gives `target`. Both states share map numbers.
fn search(
    engine: &Engine,
    r: &State,
    target: &State,
    opts: &InferOptions,
    limit: Option<usize>,
) -> Option<Vec<Arrow>> {
    let g = r.graph();
    let t = target.graph();
    let idx_t: Vec<usize> = (0..g.atom_count())
        .map(|i| {
            target
                .atom_index(g.atom(i).map.expect("mapped"))
                .expect("same maps")
        })
        .collect();
    let mut bonds: BTreeMap<Pair, i32> = BTreeMap::new();
    for ((a, b), bond) in g.bonds() {
        bump(&mut bonds, a, b, -(bond.order as i32));
    }
    let back: HashMap<usize, usize> = idx_t.iter().enumerate().map(|(i, &j)| (j, i)).collect();
    for ((a, b), bond) in t.bonds() {
        bump(&mut bonds, back[&a], back[&b], bond.order as i32);
    }
    let mut dq: Vec<i32> = (0..g.atom_count())
        .map(|i| t.atom(idx_t[i]).charge as i32 - g.atom(i).charge as i32)
        .collect();
    if bonds.is_empty() && dq.iter().all(|&q| q == 0) {
        return Some(Vec::new());
    }
    let mut s = Search {
        g,
        maps: g.atoms().iter().map(|a| a.map.expect("mapped")).collect(),
        found: Vec::new(),
        cap: opts.max_solutions,
    };
    let bond_total: i32 = bonds.values().map(|v| v.abs()).sum();
    let lower = (bond_total as usize).div_ceil(2).max(1);
    let upper = limit.map_or(opts.max_arrows, |l| l.min(opts.max_arrows));
    let want = target.canonical();
    for k in lower..=upper {
        s.found.clear();
        s.dfs(k, &mut bonds.clone(), &mut dq, &mut Vec::new());
        let mut found = std::mem::take(&mut s.found);
        found.retain(|f| f.len() == k);
        found.sort_unstable();
        found.dedup();
        for set in found {
            if let Ok(next) = engine.apply(r, &set) {
                if next.canonical() == want {
                    return Some(set);
                }
            }
        }
    }
    None
}

/// Arrows of one step arranged as an electron-flow chain: the arrow whose
/// origin is no other arrow's sink first, then each arrow leaving the
/// previous sink. Arrows that do not fit a chain keep their order at the end.
pub fn chain_order(arrows: &[Arrow]) -> Vec<Arrow> {
    let mut left: Vec<Arrow> = arrows.to_vec();
    let mut out = Vec::with_capacity(left.len());
    let sinks: Vec<u32> = left.iter().map(Arrow::sink).collect();
    let start = left
        .iter()
        .position(|a| matches!(a, Arrow::Attack(..)))
        .or_else(|| left.iter().position(|a| !sinks.contains(&a.origin())));
    let Some(mut i) = start else {
        return left;
    };
    loop {
        let a = left.remove(i);
        out.push(a);
        match left
            .iter()
            .position(|n| n.origin() == a.sink() && !matches!(n, Arrow::Attack(..)))
        {
            Some(j) => i = j,
            None => break,
        }
    }
    out.extend(left);
    out
}

/// Greedy segmentation: each step is the shortest prefix of the remaining
/// arrows that applies to a stable state.
pub fn segment_arrows(
    engine: &Engine,
    initial: &State,
    arrows: &[Arrow],
) -> Result<Vec<Vec<Arrow>>, ConvertError> {
    let mut steps = Vec::new();
    let mut cur = initial.clone();
    let mut start = 0;
    while start < arrows.len() {
        let mut cut = None;
        for end in start + 1..=arrows.len() {
            let set = &arrows[start..end];
            if let Ok(next) = engine.apply(&cur, set) {
                if next != cur {
                    cut = Some((end, next));
                    break;
                }
            }
        }
        let Some((end, next)) = cut else {
            return Err(ConvertError::Segmentation { offset: start });
        };
        steps.push(arrows[start..end].to_vec());
        cur = next;
        start = end;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn infer(r: &str, p: &str) -> Inferred {
        let engine = Engine::default();
        infer_arrows(
            &engine,
            &parse_smiles(r).unwrap(),
            &parse_smiles(p).unwrap(),
            &InferOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_sides_give_no_arrows() {
        assert!(infer("[CH3:1][OH:2]", "[CH3:1][OH:2]").arrows.is_empty());
    }

    #[test]
    fn aldehyde_hydride_transfer() {
        let got = infer(
            "[BH3-:2][H:3].[CH3:5][CH:4]=[O:1]",
            "[BH3:2].[H:3][CH:4]([CH3:5])[O-:1]",
        );
        assert_eq!(
            got.arrows,
            vec![Arrow::Ionize(4, 1), Arrow::BondAttack(2, 3, 4)]
        );
    }

    #[test]
    fn proton_transfer_with_implicit_hydrogens() {
        let got = infer("[OH-:1].[OH2:2]", "[OH2:1].[OH-:2]");
        assert_eq!(got.arrows.len(), 2);
        assert!(matches!(got.arrows[0], Arrow::Attack(1, _)));
        assert_eq!(got.product.component_keys(), vec!["O", "[OH-]"]);
    }

    #[test]
    fn segmentation_groups_unstable_prefixes() {
        let engine = Engine::default();
        let s = State::from_smiles("[BH3-:2][H:3].[CH:4](C)=[O:1]").unwrap();
        let flat = vec![Arrow::BondAttack(2, 3, 4), Arrow::Ionize(4, 1)];
        assert_eq!(
            segment_arrows(&engine, &s, &flat).unwrap(),
            vec![flat.clone()]
        );
        assert!(segment_arrows(&engine, &s, &flat[..1]).is_err());
    }

    #[test]
    fn chain_order_follows_sinks() {
        let chain = vec![
            Arrow::Attack(1, 2),
            Arrow::BondAttack(2, 3, 4),
            Arrow::Ionize(4, 5),
        ];
        let mut sorted = chain.clone();
        sorted.sort();
        assert_ne!(sorted, chain);
        assert_eq!(chain_order(&sorted), chain);
    }
}

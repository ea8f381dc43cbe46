//! Exhaustive move generation.
//!
//! A move is a chain of arrows `A1..Ak` (k ≤ `max_arrows`), each valid on the
//! pre-state, such that:
//! * after every proper prefix `A1..Ai` the only unstable atom is the sink of
//!   `Ai`, and it is unstable;
//! * `A(i+1)` is an Ionize or BondAttack whose bond starts at that sink;
//! * after the full chain the state is stable and something changed.
//!
//! Moves are reported as sorted arrow sets, deduplicated, in ascending order.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Engine, State};
use crate::mechsmiles::Arrow;
use crate::molgraph::MolGraph;
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumOptions {
    pub max_arrows: usize,
    pub exec: Exec,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            max_arrows: 4,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MoveSet {
    pub arrows: Vec<Arrow>,
}

impl MoveSet {
    pub fn kinds(&self) -> Vec<&'static str> {
        self.arrows.iter().map(Arrow::kind).collect()
    }
}

/// Arrow endpoints as atom indices.
#[derive(Debug, Clone, Copy)]
enum Move {
    Attack(usize, usize),
    Ionize(usize, usize),
    BondAttack(usize, usize, usize),
}

impl Move {
    fn sink(self) -> usize {
        match self {
            Move::Attack(_, b) | Move::Ionize(_, b) => b,
            Move::BondAttack(_, _, c) => c,
        }
    }
}

struct Ctx<'a> {
    engine: &'a Engine,
    g: &'a MolGraph,
    valence: Vec<i32>,
    maps: Vec<u32>,
    max_arrows: usize,
}

/// Scratch deltas for one chain; chains are short so linear scans suffice.
#[derive(Default, Clone)]
struct Scratch {
    bonds: Vec<((usize, usize), i32)>,
    charges: Vec<(usize, i32)>,
}

impl Scratch {
    fn bond(&mut self, a: usize, b: usize, d: i32) {
        let k = (a.min(b), a.max(b));
        match self.bonds.iter_mut().find(|(key, _)| *key == k) {
            Some((_, v)) => *v += d,
            None => self.bonds.push((k, d)),
        }
    }

    fn charge(&mut self, a: usize, d: i32) {
        match self.charges.iter_mut().find(|(key, _)| *key == a) {
            Some((_, v)) => *v += d,
            None => self.charges.push((a, d)),
        }
    }

    fn push(&mut self, m: Move) {
        match m {
            Move::Attack(a, b) => {
                self.bond(a, b, 1);
                self.charge(a, 1);
                self.charge(b, -1);
            }
            Move::Ionize(a, b) => {
                self.bond(a, b, -1);
                self.charge(a, 1);
                self.charge(b, -1);
            }
            Move::BondAttack(a, b, c) => {
                self.bond(a, b, -1);
                self.bond(b, c, 1);
                self.charge(a, 1);
                self.charge(c, -1);
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.bonds.iter().all(|(_, d)| *d == 0) && self.charges.iter().all(|(_, d)| *d == 0)
    }

    fn touched(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.charges.iter().map(|(a, _)| *a).collect();
        for ((a, b), _) in &self.bonds {
            t.push(*a);
            t.push(*b);
        }
        t.sort_unstable();
        t.dedup();
        t
    }
}

enum Check {
    Stable,
    /// unstable atoms of the partial state
    Unstable(Vec<usize>),
    Invalid,
}

impl Ctx<'_> {
    fn check(&self, s: &Scratch) -> Check {
        for &((a, b), d) in &s.bonds {
            let order = self.g.bond_order(a, b) as i32 + d;
            if !(0..=3).contains(&order) {
                return Check::Invalid;
            }
        }
        let mut bad = Vec::new();
        for atom in s.touched() {
            let mut v = self.valence[atom];
            for &((a, b), d) in &s.bonds {
                if a == atom || b == atom {
                    v += d;
                }
            }
            let dq: i32 = s
                .charges
                .iter()
                .filter(|(a, _)| *a == atom)
                .map(|(_, d)| d)
                .sum();
            let q = self.g.atom(atom).charge as i32 + dq;
            let Ok(q) = i8::try_from(q) else {
                return Check::Invalid;
            };
            let el = self.g.atom(atom).element;
            match self.engine.table.atom_violation(el, q, v as u32) {
                Ok(None) => {}
                Ok(Some(_)) => bad.push(atom),
                Err(_) => return Check::Invalid,
            }
        }
        if bad.is_empty() {
            Check::Stable
        } else {
            Check::Unstable(bad)
        }
    }

    fn to_arrow(&self, m: Move) -> Arrow {
        let f = |i: usize| self.maps[i];
        match m {
            Move::Attack(a, b) => Arrow::Attack(f(a), f(b)),
            Move::Ionize(a, b) => Arrow::Ionize(f(a), f(b)),
            Move::BondAttack(a, b, c) => Arrow::BondAttack(f(a), f(b), f(c)),
        }
    }

    /// Ionize/BondAttack moves releasing a bond of `s`.
    fn extensions(&self, s: usize) -> Vec<Move> {
        let n = self.g.atom_count();
        let mut out = Vec::new();
        for x in self.g.neighbors(s) {
            out.push(Move::Ionize(s, x));
            for c in 0..n {
                if c != s && c != x {
                    out.push(Move::BondAttack(s, x, c));
                }
            }
        }
        out
    }

    fn first_moves(&self) -> Vec<Move> {
        let g = self.g;
        let n = g.atom_count();
        let mut out = Vec::new();
        for a in 0..n {
            if g.lone_pairs(a) > 0 {
                for b in 0..n {
                    if b != a {
                        out.push(Move::Attack(a, b));
                    }
                }
            }
        }
        for ((a, b), _) in g.bonds() {
            for (x, y) in [(a, b), (b, a)] {
                out.push(Move::Ionize(x, y));
                for c in 0..n {
                    if c != x && c != y {
                        out.push(Move::BondAttack(x, y, c));
                    }
                }
            }
        }
        out
    }

    fn grow(&self, chain: &mut Vec<Move>, scratch: &Scratch, out: &mut Vec<Vec<Arrow>>) {
        match self.check(scratch) {
            Check::Invalid => {}
            Check::Stable => {
                if !scratch.is_zero() {
                    let mut arrows: Vec<Arrow> = chain.iter().map(|&m| self.to_arrow(m)).collect();
                    arrows.sort_unstable();
                    let len = arrows.len();
                    arrows.dedup();
                    if arrows.len() == len {
                        out.push(arrows);
                    }
                }
            }
            Check::Unstable(bad) => {
                let sink = chain.last().expect("non-empty chain").sink();
                if chain.len() >= self.max_arrows || bad != [sink] {
                    return;
                }
                for ext in self.extensions(sink) {
                    let mut next = scratch.clone();
                    next.push(ext);
                    chain.push(ext);
                    self.grow(chain, &next, out);
                    chain.pop();
                }
            }
        }
    }
}

impl Engine {
    /// One legal move drawn by random chain growth, or `None` when
    /// `attempts` draws all fail. Not uniform over moves.
    pub fn sample_move<R: Rng + ?Sized>(
        &self,
        state: &State,
        max_arrows: usize,
        attempts: usize,
        rng: &mut R,
    ) -> Option<MoveSet> {
        let g = state.graph();
        let ctx = Ctx {
            engine: self,
            g,
            valence: (0..g.atom_count())
                .map(|i| g.valence_sum(i) as i32)
                .collect(),
            maps: g
                .atoms()
                .iter()
                .map(|a| a.map.expect("state atoms are mapped"))
                .collect(),
            max_arrows,
        };
        let firsts = ctx.first_moves();
        if firsts.is_empty() || max_arrows == 0 {
            return None;
        }
        'attempt: for _ in 0..attempts {
            let mut chain = vec![*firsts.choose(rng).expect("non-empty")];
            let mut scratch = Scratch::default();
            scratch.push(chain[0]);
            loop {
                match ctx.check(&scratch) {
                    Check::Invalid => continue 'attempt,
                    Check::Stable => {
                        if scratch.is_zero() {
                            continue 'attempt;
                        }
                        let mut arrows: Vec<Arrow> =
                            chain.iter().map(|&m| ctx.to_arrow(m)).collect();
                        arrows.sort_unstable();
                        let len = arrows.len();
                        arrows.dedup();
                        if arrows.len() != len {
                            continue 'attempt;
                        }
                        return Some(MoveSet { arrows });
                    }
                    Check::Unstable(bad) => {
                        let sink = chain.last().expect("non-empty chain").sink();
                        if chain.len() >= max_arrows || bad != [sink] {
                            continue 'attempt;
                        }
                        let Some(&ext) = ctx.extensions(sink).choose(rng) else {
                            continue 'attempt;
                        };
                        scratch.push(ext);
                        chain.push(ext);
                    }
                }
            }
        }
        None
    }

    /// All legal moves from `state`, sorted and deduplicated.
    pub fn enumerate(&self, state: &State, opts: &EnumOptions) -> Vec<MoveSet> {
        let g = state.graph();
        if opts.max_arrows == 0 {
            return Vec::new();
        }
        let ctx = Ctx {
            engine: self,
            g,
            valence: (0..g.atom_count())
                .map(|i| g.valence_sum(i) as i32)
                .collect(),
            maps: g
                .atoms()
                .iter()
                .map(|a| a.map.expect("state atoms are mapped"))
                .collect(),
            max_arrows: opts.max_arrows,
        };
        let firsts = ctx.first_moves();
        let mut all = par::flat_map(opts.exec, &firsts, |&m| {
            let mut out = Vec::new();
            let mut scratch = Scratch::default();
            scratch.push(m);
            ctx.grow(&mut vec![m], &scratch, &mut out);
            out
        });
        all.sort_unstable();
        all.dedup();
        all.into_iter().map(|arrows| MoveSet { arrows }).collect()
    }
}

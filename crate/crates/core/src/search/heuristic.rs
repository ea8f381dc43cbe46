//! Rule-based baseline policy over enumerated moves.

use std::collections::{HashMap, HashSet};

use super::policy::{Policy, PolicyError, PolicyRequest, Proposal};
use super::Goal;
use crate::engine::{Delta, Engine, EnumOptions, State};
use crate::mechanism::step_on;
use crate::mechsmiles::Arrow;
use crate::molgraph::MolGraph;
use crate::par::Exec;

/// Heavy-atom environment: element, charge, hydrogen count and the sorted
/// heavy neighbors with bond orders. Neighbor charges are left out so that
/// an alkoxide carbon already matches its alcohol counterpart.
type Descriptor = (u8, i8, u8, Vec<(u8, u8)>);

/// Descriptor of atom `i` after the bond and charge changes of `delta`.
fn descriptor(g: &MolGraph, i: usize, delta: &Delta) -> Option<Descriptor> {
    let a = g.atom(i);
    if a.element.is_hydrogen() {
        return None;
    }
    let mut orders: Vec<(usize, i32)> = g
        .neighbors(i)
        .map(|n| (n, g.bond_order(i, n) as i32))
        .collect();
    for (&(x, y), &d) in delta
        .bonds
        .range((i, 0)..=(i, usize::MAX))
        .chain(delta.bonds.iter().filter(|((_, y), _)| *y == i))
    {
        let other = if x == i { y } else { x };
        match orders.iter_mut().find(|(n, _)| *n == other) {
            Some((_, o)) => *o += d,
            None => orders.push((other, d)),
        }
    }
    let mut hs = a.implicit_h;
    let mut nbrs = Vec::new();
    for (n, o) in orders {
        if o <= 0 {
            continue;
        }
        let e = g.atom(n).element;
        if e.is_hydrogen() {
            hs += 1;
        } else {
            nbrs.push((e.atomic_number(), o as u8));
        }
    }
    nbrs.sort_unstable();
    let q = a.charge as i32 + delta.charges.get(&i).copied().unwrap_or(0);
    Some((a.element.atomic_number(), q as i8, hs, nbrs))
}

fn descriptors(g: &MolGraph) -> HashMap<Descriptor, i32> {
    let none = Delta::default();
    let mut out = HashMap::new();
    for i in 0..g.atom_count() {
        if let Some(d) = descriptor(g, i, &none) {
            *out.entry(d).or_insert(0) += 1;
        }
    }
    out
}

fn touched(delta: &Delta) -> Vec<usize> {
    let mut t: Vec<usize> = delta.charges.keys().copied().collect();
    for &(a, b) in delta.bonds.keys() {
        t.push(a);
        t.push(b);
    }
    t.sort_unstable();
    t.dedup();
    t
}

/// Change in the number of goal environments matched by the state.
fn goal_gain(
    g: &MolGraph,
    delta: &Delta,
    goal: &HashMap<Descriptor, i32>,
    have: &HashMap<Descriptor, i32>,
) -> i32 {
    let mut diff: HashMap<Descriptor, i32> = HashMap::new();
    let none = Delta::default();
    for i in touched(delta) {
        if let Some(d) = descriptor(g, i, &none) {
            *diff.entry(d).or_insert(0) -= 1;
        }
        if let Some(d) = descriptor(g, i, delta) {
            *diff.entry(d).or_insert(0) += 1;
        }
    }
    diff.iter()
        .map(|(d, n)| {
            let want = goal.get(d).copied().unwrap_or(0);
            let before = have.get(d).copied().unwrap_or(0);
            want.min(before + n) - want.min(before)
        })
        .sum()
}

fn is_high(q: i32, el: crate::element::Element) -> bool {
    !el.is_transition_metal() && q.abs() >= 2
}

/// Ranks all moves of up to `max_arrows` arrows by hand-set priors:
/// moves that reduce total formal charge first, then electrophile
/// polarization and charge placement by electronegativity, penalizing
/// charged carbon and multiply charged atoms, and rewarding progress toward
/// the goal's atom environments.
#[derive(Debug, Clone)]
pub struct HeuristicPolicy {
    pub engine: Engine,
    pub max_arrows: usize,
    pub exec: Exec,
    pub weights: HeuristicWeights,
}

#[derive(Debug, Clone, Copy)]
pub struct HeuristicWeights {
    pub tier: f64,
    pub polarity: f64,
    pub charged_carbon: f64,
    pub high_charge: f64,
    pub charge_energy: f64,
    pub goal: f64,
    pub arrow: f64,
    /// Softmax temperature over the logits.
    pub temperature: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        HeuristicWeights {
            tier: 1.5,
            polarity: 0.3,
            charged_carbon: 1.0,
            high_charge: 2.0,
            charge_energy: 1.0,
            goal: 6.0,
            arrow: 0.1,
            temperature: 0.1,
        }
    }
}

impl Default for HeuristicPolicy {
    fn default() -> Self {
        HeuristicPolicy {
            engine: Engine::default(),
            max_arrows: 2,
            exec: Exec::default(),
            weights: HeuristicWeights::default(),
        }
    }
}

impl HeuristicPolicy {
    fn polarity(&self, g: &MolGraph, state: &State, arrows: &[Arrow]) -> f64 {
        let sink = match arrows
            .iter()
            .find(|a| matches!(a, Arrow::Attack(..)))
            .or(arrows.first())
        {
            Some(a) => a.sink(),
            None => return 0.0,
        };
        let Some(s) = state.atom_index(sink) else {
            return 0.0;
        };
        let en = g.atom(s).element.electronegativity();
        g.neighbors(s)
            .map(|n| g.atom(n).element.electronegativity() - en)
            .fold(0.0, f64::max)
    }

    /// Scored moves, best first.
    pub fn rank(&self, state: &State, goal: Option<&Goal>) -> Vec<(Vec<Arrow>, f64)> {
        let moves = self.engine.enumerate(
            state,
            &EnumOptions {
                max_arrows: self.max_arrows,
                exec: self.exec,
            },
        );
        let g = state.graph();
        let goal_desc = goal.map(|gl| descriptors(gl.state.graph()));
        let goal_total: i32 = goal_desc.as_ref().map_or(0, |d| d.values().sum());
        let have = descriptors(g);
        let w = self.weights;
        let scored: Vec<(Vec<Arrow>, f64)> = crate::par::map(self.exec, &moves, |m| {
            let Ok(delta) = self.engine.delta(state, &m.arrows) else {
                return (m.arrows.clone(), f64::NEG_INFINITY);
            };
            let (mut dq_abs, mut carbons, mut high, mut energy) = (0, 0, 0, 0.0);
            for (&i, &dq) in &delta.charges {
                let a = g.atom(i);
                let (q0, q1) = (a.charge as i32, a.charge as i32 + dq);
                dq_abs += q1.abs() - q0.abs();
                if a.element.atomic_number() == 6 {
                    carbons += i32::from(q1 != 0) - i32::from(q0 != 0);
                }
                high += i32::from(is_high(q1, a.element)) - i32::from(is_high(q0, a.element));
                energy += dq as f64 * a.element.electronegativity();
            }
            let tier = match dq_abs.cmp(&0) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => 2.0,
            };
            let gain = match &goal_desc {
                Some(d) if goal_total > 0 => {
                    goal_gain(g, &delta, d, &have) as f64 / goal_total as f64
                }
                _ => 0.0,
            };
            let logit = -w.tier * tier + w.polarity * self.polarity(g, state, &m.arrows)
                - w.charged_carbon * carbons as f64
                - w.high_charge * high as f64
                - w.charge_energy * energy
                + w.goal * gain
                - w.arrow * (m.arrows.len() as f64 - 1.0);
            (m.arrows.clone(), logit / w.temperature)
        });
        let finite: Vec<(Vec<Arrow>, f64)> =
            scored.into_iter().filter(|(_, s)| s.is_finite()).collect();
        let max = finite.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + finite.iter().map(|x| (x.1 - max).exp()).sum::<f64>().ln();
        let mut out: Vec<(Vec<Arrow>, f64)> = finite
            .into_iter()
            .map(|(a, s)| (a, (s - lse).min(0.0)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

impl Policy for HeuristicPolicy {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn propose(&self, req: &PolicyRequest<'_>) -> Result<Vec<Proposal>, PolicyError> {
        // symmetry-equivalent moves collapse onto the first of their kind
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (arrows, logprob) in self.rank(req.state, req.goal) {
            if out.len() == req.top_k {
                break;
            }
            let Ok(next) = self.engine.apply(req.state, &arrows) else {
                continue;
            };
            if seen.insert(next.canonical()) {
                out.push(Proposal {
                    mechsmiles: step_on(req.state, &arrows).to_minimal(),
                    logprob,
                });
            }
        }
        Ok(out)
    }
}

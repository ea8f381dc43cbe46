//! Policy-guided mechanism search, beam pathway retrieval and metrics.

mod heuristic;
mod policy;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, State, StateError};
use crate::mechanism::{Mechanism, MechanismError};
use crate::mechsmiles::{parse_mechsmiles, Arrow, MechStep};
use crate::molgraph::{Formula, MolGraph};
use crate::par::{self, Exec};
use crate::smiles::parse_smiles;
use crate::taskgen::Task;

pub use heuristic::{HeuristicPolicy, HeuristicWeights};
pub use policy::{
    CommandPolicy, Policy, PolicyError, PolicyRequest, Proposal, ReplayPolicy, WireRequest,
    WireResponse,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalTest {
    /// Every goal species occurs in the state.
    #[default]
    Subset,
    /// The state holds exactly the goal species.
    Exact,
}

/// Target species as sorted canonical keys.
#[derive(Debug, Clone)]
pub struct Goal {
    pub keys: Vec<String>,
    pub state: State,
    pub formula: Formula,
    pub test: GoalTest,
}

fn multiset_subset(small: &[String], big: &[String]) -> bool {
    let mut j = 0;
    for k in small {
        while j < big.len() && big[j] < *k {
            j += 1;
        }
        if j == big.len() || big[j] != *k {
            return false;
        }
        j += 1;
    }
    true
}

impl Goal {
    pub fn from_graph(g: &MolGraph, test: GoalTest) -> Result<Goal, StateError> {
        let state = State::from_graph(&g.without_maps())?;
        Ok(Goal {
            keys: state.component_keys(),
            formula: state.formula(),
            state,
            test,
        })
    }

    pub fn from_smiles(s: &str, test: GoalTest) -> Result<Goal, StateError> {
        Goal::from_graph(&parse_smiles(s)?, test)
    }

    pub fn from_state(state: &State, test: GoalTest) -> Goal {
        Goal::from_graph(state.graph(), test).expect("a state is a valid graph")
    }

    /// Goal from canonical species keys.
    pub fn from_keys(keys: &[String], test: GoalTest) -> Result<Goal, StateError> {
        Goal::from_smiles(&keys.join("."), test)
    }

    pub fn reached(&self, state: &State) -> bool {
        let have = state.component_keys();
        match self.test {
            GoalTest::Subset => multiset_subset(&self.keys, &have),
            GoalTest::Exact => self.keys == have,
        }
    }

    /// Mass check: the goal's atoms are all present in `state`.
    pub fn reachable_from(&self, state: &State) -> bool {
        let f = state.formula();
        match self.test {
            GoalTest::Subset => self.formula.is_subset_of(&f),
            GoalTest::Exact => self.formula == f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub budget: usize,
    pub top_k: usize,
    pub max_children: usize,
    pub beam_width: usize,
    pub max_depth: usize,
    pub task: Task,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 50,
            top_k: 10,
            max_children: 5,
            beam_width: 3,
            max_depth: 12,
            task: Task::NoByproducts,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.budget == 0
            || self.top_k == 0
            || self.max_children == 0
            || self.beam_width == 0
            || self.max_depth == 0
        {
            return Err("search settings must all be positive".into());
        }
        if self.max_children > self.top_k {
            return Err(format!(
                "max_children {} exceeds top_k {}",
                self.max_children, self.top_k
            ));
        }
        Ok(())
    }
}

/// A sequence of steps from the start state.
#[derive(Debug, Clone)]
pub struct Pathway {
    pub steps: Vec<MechStep>,
    pub arrows: Vec<Vec<Arrow>>,
    /// Start state followed by the state after each step.
    pub states: Vec<State>,
    pub cum_score: f64,
}

impl Pathway {
    fn start(state: State) -> Pathway {
        Pathway {
            steps: Vec::new(),
            arrows: Vec::new(),
            states: vec![state],
            cum_score: 0.0,
        }
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("pathway has a start state")
    }

    fn visited(&self, key: &str) -> bool {
        self.states.iter().any(|s| s.canonical() == key)
    }

    fn extend(&self, child: Child) -> Pathway {
        let mut p = self.clone();
        p.steps.push(child.step);
        p.arrows.push(child.arrows);
        p.states.push(child.state);
        p.cum_score += child.logprob;
        p
    }

    pub fn to_mechanism(
        &self,
        engine: &Engine,
        reaction_id: &str,
    ) -> Result<Mechanism, MechanismError> {
        Mechanism::from_arrows(engine, reaction_id, self.states[0].clone(), &self.arrows)
    }

    pub fn canonical_states(&self) -> Vec<String> {
        self.states.iter().map(State::canonical).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub solved: bool,
    pub expansions: usize,
    pub invalid_proposals: usize,
    /// Set when the goal failed the mass check and nothing was expanded.
    pub preflight: Option<String>,
    /// Scores of expanded nodes in expansion order.
    pub expanded_scores: Vec<f64>,
    /// Most children kept for any node.
    pub max_children_kept: usize,
    pub steps: Vec<String>,
    pub cum_score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub report: SearchReport,
    /// The solution, or the deepest best-scoring partial path on failure.
    pub pathway: Pathway,
}

struct Child {
    step: MechStep,
    arrows: Vec<Arrow>,
    state: State,
    logprob: f64,
}

/// Valid children of `path`'s last state, in policy order, at most
/// `max_children`, skipping proposals that do not apply, have a bad score,
/// repeat a sibling's state or revisit a state of the path.
fn children(
    engine: &Engine,
    policy: &dyn Policy,
    path: &Pathway,
    goal: &Goal,
    cfg: &SearchConfig,
    invalid: &mut usize,
) -> Result<Vec<Child>, PolicyError> {
    let state = path.last();
    let req = PolicyRequest {
        state,
        goal: Some(goal),
        task: cfg.task,
        top_k: cfg.top_k,
    };
    let mut out = Vec::new();
    let mut siblings = std::collections::HashSet::new();
    for p in policy.propose(&req)?.into_iter().take(cfg.top_k) {
        if out.len() == cfg.max_children {
            break;
        }
        if !p.logprob.is_finite() || p.logprob > 1e-9 {
            log::debug!(
                "skipping proposal `{}` with score {}",
                p.mechsmiles,
                p.logprob
            );
            *invalid += 1;
            continue;
        }
        let applied = parse_mechsmiles(&p.mechsmiles)
            .map_err(|e| e.to_string())
            .and_then(|step| engine.apply_step(state, &step).map_err(|e| e.to_string()));
        let (next, arrows) = match applied {
            Ok(x) => x,
            Err(e) => {
                log::debug!("skipping proposal `{}`: {e}", p.mechsmiles);
                *invalid += 1;
                continue;
            }
        };
        let key = next.canonical();
        if path.visited(&key) || !siblings.insert(key) {
            continue;
        }
        let step = crate::mechanism::step_on(state, &arrows);
        out.push(Child {
            step,
            arrows,
            state: next,
            logprob: p.logprob.min(0.0),
        });
    }
    Ok(out)
}

struct Entry {
    score: f64,
    seq: usize,
    path: Pathway,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-first search on cumulative log-probability. The goal is tested when
/// a node is popped; each pop of a non-goal node is one expansion.
pub fn best_first_search(
    engine: &Engine,
    policy: &dyn Policy,
    initial: &State,
    goal: &Goal,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, PolicyError> {
    let mut report = SearchReport {
        solved: false,
        expansions: 0,
        invalid_proposals: 0,
        preflight: None,
        expanded_scores: Vec::new(),
        max_children_kept: 0,
        steps: Vec::new(),
        cum_score: 0.0,
    };
    let root = Pathway::start(initial.clone());
    if !goal.reachable_from(initial) {
        report.preflight = Some("goal atoms are not all present in the reactants".into());
        return Ok(SearchOutcome {
            report,
            pathway: root,
        });
    }
    let mut best = root.clone();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Entry {
        score: 0.0,
        seq,
        path: root,
    });
    while let Some(Entry { score, path, .. }) = heap.pop() {
        if goal.reached(path.last()) {
            report.solved = true;
            best = path;
            break;
        }
        if path.steps.len() >= cfg.max_depth {
            continue;
        }
        if report.expansions == cfg.budget {
            break;
        }
        report.expansions += 1;
        report.expanded_scores.push(score);
        if path.steps.len() > best.steps.len()
            || (path.steps.len() == best.steps.len() && path.cum_score > best.cum_score)
        {
            best = path.clone();
        }
        let kids = children(
            engine,
            policy,
            &path,
            goal,
            cfg,
            &mut report.invalid_proposals,
        )?;
        report.max_children_kept = report.max_children_kept.max(kids.len());
        for child in kids {
            seq += 1;
            let next = path.extend(child);
            heap.push(Entry {
                score: next.cum_score,
                seq,
                path: next,
            });
        }
    }
    report.steps = best.steps.iter().map(MechStep::to_minimal).collect();
    report.cum_score = best.cum_score;
    Ok(SearchOutcome {
        report,
        pathway: best,
    })
}

/// Beam search keeping the `cfg.beam_width` best partial pathways per
/// depth. The greedy line (rank-1 child of rank-1 child ...) always stays
/// in the beam. Returns goal-reaching pathways, best first.
pub fn beam_pathways(
    engine: &Engine,
    policy: &dyn Policy,
    initial: &State,
    goal: &Goal,
    cfg: &SearchConfig,
) -> Result<Vec<Pathway>, PolicyError> {
    let width = cfg.beam_width.max(1);
    let mut done = Vec::new();
    let root = Pathway::start(initial.clone());
    if goal.reached(initial) {
        return Ok(vec![root]);
    }
    if !goal.reachable_from(initial) {
        return Ok(done);
    }
    let mut invalid = 0;
    // (path, is greedy line)
    let mut beam = vec![(root, true)];
    for _ in 0..cfg.max_depth {
        let mut pool: Vec<(Pathway, bool)> = Vec::new();
        for (path, greedy) in &beam {
            let kids = children(engine, policy, path, goal, cfg, &mut invalid)?;
            for (rank, child) in kids.into_iter().enumerate() {
                pool.push((path.extend(child), *greedy && rank == 0));
            }
        }
        // stable sort keeps parent beam order, then policy order, on ties
        pool.sort_by(|a, b| b.0.cum_score.total_cmp(&a.0.cum_score));
        let spine = pool.iter().position(|(_, g)| *g);
        let mut keep: Vec<(Pathway, bool)> = Vec::with_capacity(width);
        let mut rest = Vec::new();
        for (i, item) in pool.into_iter().enumerate() {
            if keep.len() < width {
                keep.push(item);
            } else if Some(i) == spine {
                rest.push(item);
            }
        }
        if let Some(s) = rest.pop() {
            keep.pop();
            keep.push(s);
        }
        beam.clear();
        for (path, greedy) in keep {
            if goal.reached(path.last()) {
                done.push(path);
            } else {
                beam.push((path, greedy));
            }
        }
        if beam.is_empty() {
            break;
        }
    }
    done.sort_by(|a, b| b.cum_score.total_cmp(&a.cum_score));
    Ok(done)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub widths: Vec<usize>,
    pub search: SearchConfig,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 3, 5, 10],
            widths: vec![1, 3],
            search: SearchConfig::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mechanisms: usize,
    pub steps: usize,
    pub step_hits: BTreeMap<usize, usize>,
    pub pathway_hits: BTreeMap<usize, usize>,
    pub policy_errors: usize,
}

impl Metrics {
    pub fn step_accuracy(&self, k: usize) -> f64 {
        ratio(self.step_hits.get(&k).copied().unwrap_or(0), self.steps)
    }

    pub fn pathway_accuracy(&self, width: usize) -> f64 {
        ratio(
            self.pathway_hits.get(&width).copied().unwrap_or(0),
            self.mechanisms,
        )
    }

    fn merge(&mut self, other: &Metrics) {
        self.mechanisms += other.mechanisms;
        self.steps += other.steps;
        self.policy_errors += other.policy_errors;
        for (k, n) in &other.step_hits {
            *self.step_hits.entry(*k).or_insert(0) += n;
        }
        for (k, n) in &other.pathway_hits {
            *self.pathway_hits.entry(*k).or_insert(0) += n;
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("mechanisms {}  steps {}\n", self.mechanisms, self.steps);
        for k in self.step_hits.keys() {
            out += &format!("step top-{k:<3} {:6.2}%\n", 100.0 * self.step_accuracy(*k));
        }
        for w in self.pathway_hits.keys() {
            out += &format!(
                "pathway Bw={w:<3} {:6.2}%\n",
                100.0 * self.pathway_accuracy(*w)
            );
        }
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Rank of the first proposal (0-based) whose application reproduces
/// `expected`, compared canonically.
fn hit_rank(
    engine: &Engine,
    state: &State,
    proposals: &[Proposal],
    expected: &str,
) -> Option<usize> {
    proposals.iter().position(|p| {
        parse_mechsmiles(&p.mechsmiles)
            .ok()
            .and_then(|step| engine.apply_step(state, &step).ok())
            .is_some_and(|(next, _)| next.canonical() == expected)
    })
}

fn evaluate_one(
    engine: &Engine,
    mech: &Mechanism,
    policy: &dyn Policy,
    cfg: &EvalConfig,
) -> Metrics {
    let mut m = Metrics {
        mechanisms: 1,
        steps: mech.steps.len(),
        ..Metrics::default()
    };
    let goal = Goal::from_state(mech.goal(), GoalTest::Exact);
    let top = cfg.ks.iter().copied().max().unwrap_or(1);
    let states = mech.states();
    for i in 0..mech.steps.len() {
        let req = PolicyRequest {
            state: states[i],
            goal: Some(&goal),
            task: cfg.search.task,
            top_k: top,
        };
        let proposals = match policy.propose(&req) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{}: policy failed: {e}", mech.reaction_id);
                m.policy_errors += 1;
                Vec::new()
            }
        };
        let rank = hit_rank(engine, states[i], &proposals, &states[i + 1].canonical());
        for &k in &cfg.ks {
            *m.step_hits.entry(k).or_insert(0) += usize::from(rank.is_some_and(|r| r < k));
        }
    }
    let truth: Vec<String> = states.iter().map(|s| s.canonical()).collect();
    for &w in &cfg.widths {
        let scfg = SearchConfig {
            beam_width: w,
            max_depth: mech.steps.len().max(1),
            ..cfg.search
        };
        let hit = match beam_pathways(engine, policy, &mech.initial, &goal, &scfg) {
            Ok(found) => found.iter().any(|p| p.canonical_states() == truth),
            Err(e) => {
                log::warn!("{}: policy failed: {e}", mech.reaction_id);
                m.policy_errors += 1;
                false
            }
        };
        *m.pathway_hits.entry(w).or_insert(0) += usize::from(hit);
    }
    m
}

/// Top-k step accuracy and pathway accuracy per beam width. A step counts
/// when applying a proposal gives the recorded next state; a pathway counts
/// when some returned candidate passes through the recorded state sequence.
pub fn evaluate(
    engine: &Engine,
    mechs: &[Mechanism],
    policy: &dyn Policy,
    cfg: &EvalConfig,
) -> Metrics {
    let parts = par::map(cfg.exec, mechs, |m| evaluate_one(engine, m, policy, cfg));
    sum_metrics(&parts, cfg)
}

/// Evaluation against each mechanism's own recorded steps: the replay
/// policy for mechanism `m` knows only `m`, so mechanisms that share
/// states and final states but take different routes are not confused.
pub fn evaluate_replay(engine: &Engine, mechs: &[Mechanism], cfg: &EvalConfig) -> Metrics {
    let parts = par::map(cfg.exec, mechs, |m| {
        let policy = ReplayPolicy::new(std::slice::from_ref(m));
        evaluate_one(engine, m, &policy, cfg)
    });
    sum_metrics(&parts, cfg)
}

fn sum_metrics(parts: &[Metrics], cfg: &EvalConfig) -> Metrics {
    let mut total = Metrics::default();
    for k in &cfg.ks {
        total.step_hits.insert(*k, 0);
    }
    for w in &cfg.widths {
        total.pathway_hits.insert(*w, 0);
    }
    for p in parts {
        total.merge(p);
    }
    total
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub validated: bool,
    pub mechanism: Option<Mechanism>,
    pub report: SearchReport,
}

/// Looks for a mechanism turning `reactants` into a state holding every
/// component of `product`. Not finding one is advisory only.
pub fn validate_reaction(
    engine: &Engine,
    reactants: &State,
    product: &MolGraph,
    policy: &dyn Policy,
    cfg: &SearchConfig,
) -> Result<Validation, PolicyError> {
    let goal = match Goal::from_graph(product, GoalTest::Subset) {
        Ok(g) => g,
        Err(e) => {
            return Ok(Validation {
                validated: false,
                mechanism: None,
                report: SearchReport {
                    solved: false,
                    expansions: 0,
                    invalid_proposals: 0,
                    preflight: Some(format!("invalid product: {e}")),
                    expanded_scores: Vec::new(),
                    max_children_kept: 0,
                    steps: Vec::new(),
                    cum_score: 0.0,
                },
            })
        }
    };
    let out = best_first_search(engine, policy, reactants, &goal, cfg)?;
    let mechanism = if out.report.solved {
        out.pathway.to_mechanism(engine, "validated").ok()
    } else {
        None
    };
    Ok(Validation {
        validated: mechanism.is_some(),
        mechanism,
        report: out.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn boro() -> (Engine, Mechanism) {
        let engine = Engine::default();
        let m = corpus::curated_by_id(&engine, "borohydride-reduction").unwrap();
        (engine, m)
    }

    #[test]
    fn goal_tests() {
        let s = State::from_smiles("CCO.O.[Na+].[Cl-]").unwrap();
        assert!(Goal::from_smiles("OCC.[Na+]", GoalTest::Subset)
            .unwrap()
            .reached(&s));
        assert!(!Goal::from_smiles("OCC.[Na+]", GoalTest::Exact)
            .unwrap()
            .reached(&s));
        assert!(!Goal::from_smiles("O.O", GoalTest::Subset)
            .unwrap()
            .reached(&s));
        assert!(Goal::from_smiles("[Cl-].[Na+].O.CCO", GoalTest::Exact)
            .unwrap()
            .reached(&s));
    }

    #[test]
    fn replay_solves_with_one_expansion_per_step() {
        let (engine, m) = boro();
        let policy = ReplayPolicy::new(std::slice::from_ref(&m));
        let goal = Goal::from_keys(&m.main_product(), GoalTest::Subset).unwrap();
        let out = best_first_search(
            &engine,
            &policy,
            &m.initial,
            &goal,
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(out.report.solved);
        assert_eq!(out.report.expansions, m.steps.len());
        assert_eq!(out.pathway.arrows.len(), m.steps.len());
    }

    #[test]
    fn unreachable_goal_fails_preflight() {
        let (engine, m) = boro();
        let policy = ReplayPolicy::new(std::slice::from_ref(&m));
        let goal = Goal::from_smiles("c1ccccc1Br", GoalTest::Subset).unwrap();
        let out = best_first_search(
            &engine,
            &policy,
            &m.initial,
            &goal,
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(!out.report.solved);
        assert_eq!(out.report.expansions, 0);
        assert!(out.report.preflight.is_some());
    }

    #[test]
    fn replay_evaluation_is_perfect() {
        let engine = Engine::default();
        let mechs = corpus::curated(&engine);
        let policy = ReplayPolicy::new(&mechs);
        let metrics = evaluate(&engine, &mechs, &policy, &EvalConfig::default());
        assert_eq!(metrics.mechanisms, mechs.len());
        for k in [1, 3, 5, 10] {
            assert_eq!(metrics.step_accuracy(k), 1.0);
        }
        assert_eq!(metrics.pathway_accuracy(1), 1.0);
        assert_eq!(metrics.pathway_accuracy(3), 1.0);
    }

    #[test]
    fn config_checks() {
        assert!(SearchConfig::default().check().is_ok());
        assert!(SearchConfig {
            max_children: 11,
            ..SearchConfig::default()
        }
        .check()
        .is_err());
    }
}

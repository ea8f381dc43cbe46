//! Training and evaluation samples for the four prediction tasks.

mod tokenizer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::State;
use crate::mechanism::Mechanism;
use crate::mechsmiles::MechStep;
use crate::molgraph::canonical_form;
use crate::par::{self, Exec};
use crate::smiles::MapMode;

pub use tokenizer::{detokenize, tokenize, tokens, vocab, TokenError, Vocab, MARKERS, SPECIALS};

/// Decreasing amounts of input information, from the single elementary step
/// to deduplicated reactants without by-products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ElementaryStep,
    Equilibrated,
    NoByproducts,
    NoStoichiometry,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::ElementaryStep,
        Task::Equilibrated,
        Task::NoByproducts,
        Task::NoStoichiometry,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Task> {
        Task::ALL.get((n as usize).checked_sub(1)?).copied()
    }
}

/// `Retro` puts the product first, `Forward` the reactants first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Retro,
    Forward,
    NoProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variants {
    pub retro: bool,
    pub forward: bool,
    pub no_product: bool,
}

impl Default for Variants {
    fn default() -> Self {
        Variants {
            retro: true,
            forward: true,
            no_product: true,
        }
    }
}

impl Variants {
    pub fn enabled(&self) -> Vec<Variant> {
        [
            (self.retro, Variant::Retro),
            (self.forward, Variant::Forward),
            (self.no_product, Variant::NoProduct),
        ]
        .into_iter()
        .filter_map(|(on, v)| on.then_some(v))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSample {
    pub task: Task,
    pub input: String,
    pub target: String,
    pub reaction_id: String,
    pub step_index: usize,
    pub variant: Variant,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("mechanism `{0}` has no steps")]
    NoSteps(String),
}

/// Reactant and product text for one step of one task.
pub fn sides(mech: &Mechanism, task: Task, step: usize) -> (String, String) {
    let states = mech.states();
    let state = states[step];
    let mech_step = &mech.steps[step];
    match task {
        Task::ElementaryStep => {
            let host = State::from_graph(&mech_step.host).expect("host comes from a state");
            let reac = host.smiles(&MapMode::None);
            let after = states[step + 1];
            let maps: Vec<u32> = mech_step
                .host
                .atoms()
                .iter()
                .filter_map(|a| a.map)
                .collect();
            let prod = after.components_with(&maps);
            (reac, crate::smiles::write_smiles(&prod, &MapMode::None))
        }
        Task::Equilibrated => (state.smiles(&MapMode::None), mech.all_products().join(".")),
        Task::NoByproducts => (state.smiles(&MapMode::None), mech.main_product().join(".")),
        Task::NoStoichiometry => {
            let mut keys: Vec<String> = state
                .graph()
                .split_components()
                .iter()
                .map(canonical_form)
                .collect();
            keys.sort();
            keys.dedup();
            (keys.join("."), mech.main_product().join("."))
        }
    }
}

/// Target text: the minimal MechSMILES of the step.
pub fn target(step: &MechStep) -> String {
    step.to_minimal()
}

pub fn format_input(reac: &str, prod: &str, variant: Variant) -> String {
    match variant {
        Variant::Retro => format!("[prod]{prod}[reac]{reac}[mech]"),
        Variant::Forward => format!("[reac]{reac}[prod]{prod}[mech]"),
        Variant::NoProduct => format!("[reac]{reac}[mech]"),
    }
}

/// One sample per step and enabled variant.
pub fn build_samples(
    mech: &Mechanism,
    task: Task,
    variants: &Variants,
) -> Result<Vec<TaskSample>, TaskError> {
    if mech.steps.is_empty() {
        return Err(TaskError::NoSteps(mech.reaction_id.clone()));
    }
    let mut out = Vec::new();
    for (i, step) in mech.steps.iter().enumerate() {
        let (reac, prod) = sides(mech, task, i);
        let target = target(step);
        for variant in variants.enabled() {
            out.push(TaskSample {
                task,
                input: format_input(&reac, &prod, variant),
                target: target.clone(),
                reaction_id: mech.reaction_id.clone(),
                step_index: i,
                variant,
            });
        }
    }
    Ok(out)
}

/// Samples for many mechanisms, in input order; mechanisms without steps
/// are skipped.
pub fn build_corpus(
    mechs: &[Mechanism],
    tasks: &[Task],
    variants: &Variants,
    exec: Exec,
) -> Vec<TaskSample> {
    par::flat_map(exec, mechs, |m| {
        tasks
            .iter()
            .flat_map(|&t| build_samples(m, t, variants).unwrap_or_default())
            .collect()
    })
}

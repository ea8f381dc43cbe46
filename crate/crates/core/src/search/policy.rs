//! Policies proposing the next elementary step for a state.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Goal;
use crate::engine::State;
use crate::mechanism::Mechanism;
use crate::smiles::MapMode;
use crate::taskgen::Task;

pub struct PolicyRequest<'a> {
    pub state: &'a State,
    pub goal: Option<&'a Goal>,
    pub task: Task,
    pub top_k: usize,
}

/// A proposed step (MechSMILES over the request state) and its log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub mechsmiles: String,
    pub logprob: f64,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy process: {0}")]
    Io(#[from] std::io::Error),
    #[error("policy response: {0}")]
    Protocol(String),
}

/// Ranked next-step proposals, best first.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn propose(&self, req: &PolicyRequest<'_>) -> Result<Vec<Proposal>, PolicyError>;
}

/// Line-delimited JSON request sent to external policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub state_mechsmiles_host: String,
    pub goal: Option<String>,
    pub task: u8,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub proposals: Vec<Proposal>,
}

impl WireRequest {
    pub fn from_request(req: &PolicyRequest<'_>) -> WireRequest {
        WireRequest {
            state_mechsmiles_host: req.state.smiles(&MapMode::All),
            goal: req.goal.map(|g| g.keys.join(".")),
            task: req.task.number(),
            top_k: req.top_k,
        }
    }
}

/// Emits the recorded next step of any known mechanism state. Steps are
/// looked up by state and goal first, so mechanisms sharing intermediates
/// stay apart when the request carries their final state.
#[derive(Debug, Default, Clone)]
pub struct ReplayPolicy {
    next: HashMap<String, Vec<String>>,
    by_goal: HashMap<(String, String), Vec<String>>,
}

fn push_unique(list: &mut Vec<String>, text: &str) {
    if !list.iter().any(|t| t == text) {
        list.push(text.to_string());
    }
}

impl ReplayPolicy {
    pub fn new(mechs: &[Mechanism]) -> ReplayPolicy {
        let mut p = ReplayPolicy::default();
        for m in mechs {
            p.add(m);
        }
        p
    }

    pub fn add(&mut self, m: &Mechanism) {
        let end = m.goal().canonical();
        for (state, step) in m.states().into_iter().zip(&m.steps) {
            let key = state.canonical();
            let text = step.to_minimal();
            push_unique(self.by_goal.entry((key.clone(), end.clone())).or_default(), &text);
            push_unique(self.next.entry(key).or_default(), &text);
        }
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> &str {
        "replay"
    }

    fn propose(&self, req: &PolicyRequest<'_>) -> Result<Vec<Proposal>, PolicyError> {
        let key = req.state.canonical();
        let scoped = req
            .goal
            .and_then(|g| self.by_goal.get(&(key.clone(), g.state.canonical())));
        Ok(scoped
            .or_else(|| self.next.get(&key))
            .map(|steps| {
                steps
                    .iter()
                    .take(req.top_k)
                    .map(|s| Proposal {
                        mechsmiles: s.clone(),
                        logprob: 0.0,
                    })
                    .collect()
            })
            .unwrap_or_default())
    }
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Talks to a child process: one JSON request line in, one response line out.
/// Calls are serialized.
pub struct CommandPolicy {
    name: String,
    pipe: Mutex<Pipe>,
}

impl CommandPolicy {
    pub fn spawn(program: &str, args: &[String]) -> Result<CommandPolicy, PolicyError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| PolicyError::Protocol("no stdin".into()))?;
        let stdout = BufReader::new(
            child
                .stdout
                .take()
                .ok_or_else(|| PolicyError::Protocol("no stdout".into()))?,
        );
        Ok(CommandPolicy {
            name: program.to_string(),
            pipe: Mutex::new(Pipe {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl Drop for CommandPolicy {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}

impl Policy for CommandPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn propose(&self, req: &PolicyRequest<'_>) -> Result<Vec<Proposal>, PolicyError> {
        let line =
            serde_json::to_string(&WireRequest::from_request(req)).expect("request serializes");
        let mut pipe = self
            .pipe
            .lock()
            .map_err(|_| PolicyError::Protocol("poisoned policy pipe".into()))?;
        writeln!(pipe.stdin, "{line}")?;
        pipe.stdin.flush()?;
        let mut reply = String::new();
        if pipe.stdout.read_line(&mut reply)? == 0 {
            return Err(PolicyError::Protocol(
                "policy process closed its output".into(),
            ));
        }
        let resp: WireResponse =
            serde_json::from_str(&reply).map_err(|e| PolicyError::Protocol(e.to_string()))?;
        Ok(resp.proposals)
    }
}

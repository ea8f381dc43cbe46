//! File-backed annotation sessions. Each session is one JSON document named
//! after its id; writes go to a temporary file that is renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use arrowpush::engine::{Engine, State, StepError};
use arrowpush::mechanism::{step_on, DeclaredProducts, Mechanism, MechanismError};
use arrowpush::mechsmiles::{parse_mechsmiles, Arrow, MechError, MechStep};
use arrowpush::search::{Goal, GoalTest};
use arrowpush::smiles::MapMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    InProgress,
    Complete,
}

/// What is persisted. The current state is not stored: it is the replay of
/// `steps` from `reactants`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub session_id: String,
    pub reaction_id: String,
    pub reactants: String,
    #[serde(default)]
    pub products: Option<String>,
    #[serde(default)]
    pub main_product: Option<String>,
    /// Committed steps as minimal MechSMILES in the state's map numbers.
    pub steps: Vec<String>,
    /// Undone steps, most recently undone last.
    #[serde(default)]
    pub redo: Vec<String>,
}

/// A session with its replayed mechanism.
#[derive(Debug, Clone)]
pub struct Session {
    pub doc: SessionDoc,
    pub mechanism: Mechanism,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub reaction_id: String,
    pub reactants: String,
    pub products: Option<String>,
    pub status: Status,
    pub steps: Vec<String>,
    pub states: Vec<String>,
    pub current: String,
    pub components: Vec<String>,
    pub can_undo: bool,
    pub can_redo: bool,
}

impl Session {
    pub fn view(&self) -> SessionView {
        let cur = self.mechanism.goal();
        SessionView {
            session_id: self.doc.session_id.clone(),
            reaction_id: self.doc.reaction_id.clone(),
            reactants: self.doc.reactants.clone(),
            products: self.doc.products.clone(),
            status: self.status,
            steps: self.doc.steps.clone(),
            states: self.mechanism.states().iter().map(|s| s.smiles(&MapMode::All)).collect(),
            current: cur.smiles(&MapMode::All),
            components: cur.component_keys(),
            can_undo: !self.doc.steps.is_empty(),
            can_redo: !self.doc.redo.is_empty(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error("invalid session id `{0}`")]
    BadId(String),
    #[error("reactants: {0}")]
    Reactants(String),
    #[error("products: {0}")]
    Products(String),
    #[error(transparent)]
    Parse(#[from] MechError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("stored session does not replay: {0}")]
    Corrupt(#[from] MechanismError),
    #[error("nothing to {0}")]
    Nothing(&'static str),
    #[error("session store: {0}")]
    Io(#[from] std::io::Error),
    #[error("session file: {0}")]
    Json(#[from] serde_json::Error),
}

/// New-session request.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct NewSession {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub reaction_id: Option<String>,
    pub reactants: String,
    #[serde(default)]
    pub products: Option<String>,
    #[serde(default)]
    pub main_product: Option<String>,
}

/// A step to commit: MechSMILES, or arrows in the current state's maps.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StepInput {
    MechSmiles { mechsmiles: String },
    Arrows { arrows: Vec<Arrow> },
}

pub struct SessionStore {
    dir: PathBuf,
    engine: Engine,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>, engine: Engine) -> Result<SessionStore, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SessionStore { dir, engine, locks: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Runs `f` with the session's lock held, so operations on one session
    /// are serialized.
    fn locked<R>(&self, id: &str, f: impl FnOnce() -> Result<R, SessionError>) -> Result<R, SessionError> {
        if !valid_id(id) {
            return Err(SessionError::BadId(id.to_string()));
        }
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        f()
    }

    fn write(&self, doc: &SessionDoc) -> Result<(), SessionError> {
        let path = self.path(&doc.session_id);
        let tmp = path.with_extension("json.tmp");
        let mut file = fs::File::create(&tmp)?;
        file.write_all(serde_json::to_string_pretty(doc)?.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn read(&self, id: &str) -> Result<SessionDoc, SessionError> {
        let text = fs::read_to_string(self.path(id)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SessionError::NotFound(id.to_string()),
            _ => SessionError::Io(e),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the mechanism and status of a stored document.
    pub fn materialize(&self, doc: SessionDoc) -> Result<Session, SessionError> {
        let initial = State::from_smiles(&doc.reactants).map_err(|e| SessionError::Reactants(e.to_string()))?;
        let written = doc
            .steps
            .iter()
            .map(|s| parse_mechsmiles(s))
            .collect::<Result<Vec<MechStep>, _>>()?;
        let mut mechanism = Mechanism::replay(&self.engine, doc.reaction_id.clone(), initial, &written)?;
        if let (Some(all), Some(main)) = (&doc.products, &doc.main_product) {
            let declared = DeclaredProducts::from_smiles(all, main).map_err(|e| SessionError::Products(e.to_string()))?;
            mechanism = mechanism.with_declared(declared);
        }
        let status = match &doc.products {
            Some(p) if !doc.steps.is_empty() => {
                let target = doc.main_product.as_deref().unwrap_or(p);
                let goal = Goal::from_smiles(target, GoalTest::Subset).map_err(|e| SessionError::Products(e.to_string()))?;
                if goal.reached(mechanism.goal()) {
                    Status::Complete
                } else {
                    Status::InProgress
                }
            }
            _ => Status::InProgress,
        };
        Ok(Session { doc, mechanism, status })
    }

    pub fn create(&self, req: NewSession) -> Result<Session, SessionError> {
        let id = req.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
        self.locked(&id, || {
            if self.path(&id).exists() {
                return Err(SessionError::Exists(id.clone()));
            }
            let doc = SessionDoc {
                session_id: id.clone(),
                reaction_id: req.reaction_id.clone().unwrap_or_else(|| id.clone()),
                reactants: req.reactants.clone(),
                products: req.products.clone(),
                main_product: req.main_product.clone(),
                steps: Vec::new(),
                redo: Vec::new(),
            };
            let session = self.materialize(doc)?;
            self.write(&session.doc)?;
            Ok(session)
        })
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionError> {
        self.locked(id, || self.materialize(self.read(id)?))
    }

    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn delete(&self, id: &str) -> Result<(), SessionError> {
        self.locked(id, || {
            self.read(id)?;
            fs::remove_file(self.path(id))?;
            Ok(())
        })
    }

    fn update(&self, id: &str, f: impl FnOnce(&Session) -> Result<SessionDoc, SessionError>) -> Result<Session, SessionError> {
        self.locked(id, || {
            let current = self.materialize(self.read(id)?)?;
            let next = self.materialize(f(&current)?)?;
            self.write(&next.doc)?;
            Ok(next)
        })
    }

    /// Applies a step to the current state and commits it. The redo history
    /// is cleared.
    pub fn commit(&self, id: &str, input: &StepInput) -> Result<Session, SessionError> {
        self.update(id, |s| {
            let cur = s.mechanism.goal();
            let arrows = match input {
                StepInput::MechSmiles { mechsmiles } => self.engine.apply_step(cur, &parse_mechsmiles(mechsmiles)?)?.1,
                StepInput::Arrows { arrows } => {
                    self.engine.apply(cur, arrows).map_err(StepError::from)?;
                    arrows.clone()
                }
            };
            let mut doc = s.doc.clone();
            doc.steps.push(step_on(cur, &arrows).to_minimal());
            doc.redo.clear();
            Ok(doc)
        })
    }

    pub fn undo(&self, id: &str) -> Result<Session, SessionError> {
        self.update(id, |s| {
            let mut doc = s.doc.clone();
            let step = doc.steps.pop().ok_or(SessionError::Nothing("undo"))?;
            doc.redo.push(step);
            Ok(doc)
        })
    }

    pub fn redo(&self, id: &str) -> Result<Session, SessionError> {
        self.update(id, |s| {
            let mut doc = s.doc.clone();
            let step = doc.redo.pop().ok_or(SessionError::Nothing("redo"))?;
            doc.steps.push(step);
            Ok(doc)
        })
    }
}

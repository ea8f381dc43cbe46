//! JSON-over-HTTP routes.

use std::sync::Arc;

use arrowpush::convert::{infer_arrows, ConvertError, InferOptions};
use arrowpush::engine::{ApplyError, EnumOptions, Engine, State, StepError};
use arrowpush::mechanism::step_on;
use arrowpush::mechsmiles::{parse_mechsmiles, Arrow, MechError, Scope};
use arrowpush::molgraph::{validate, MolGraph};
use arrowpush::search::{validate_reaction, Policy, SearchConfig};
use arrowpush::smiles::{parse_smiles, MapMode, SmilesError};
use arrowpush::taskgen::{build_samples, Task, Variants};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State as Extract};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::layout::layout;
use crate::session::{NewSession, SessionError, SessionStore, StepInput};

pub struct AppState {
    pub engine: Engine,
    pub store: SessionStore,
    pub policy: Arc<dyn Policy>,
}

pub type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> ApiError {
        ApiError { status, code, message: message.to_string(), detail: Value::Null }
    }

    fn detail(mut self, detail: Value) -> ApiError {
        self.detail = detail;
        self
    }

    fn bad_request(message: impl ToString) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.code, "message": self.message, "detail": self.detail});
        (self.status, Json(body)).into_response()
    }
}

impl From<SmilesError> for ApiError {
    fn from(e: SmilesError) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "smiles", &e).detail(json!({"offset": e.offset()}))
    }
}

impl From<MechError> for ApiError {
    fn from(e: MechError) -> ApiError {
        let offset = match &e {
            MechError::MalformedArrow { offset, .. } | MechError::DanglingMap { offset, .. } => Some(*offset),
            MechError::Smiles(s) => s.offset(),
            _ => None,
        };
        ApiError::new(StatusCode::BAD_REQUEST, "mechsmiles", &e).detail(json!({"offset": offset}))
    }
}

impl From<ApplyError> for ApiError {
    fn from(e: ApplyError) -> ApiError {
        let detail = serde_json::to_value(&e).unwrap_or(Value::Null);
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "apply", &e).detail(detail)
    }
}

impl From<StepError> for ApiError {
    fn from(e: StepError) -> ApiError {
        match e {
            StepError::Apply(a) => a.into(),
            StepError::Bind(b) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bind", b),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        match e {
            SessionError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e),
            SessionError::Exists(_) | SessionError::Nothing(_) => ApiError::new(StatusCode::CONFLICT, "conflict", e),
            SessionError::BadId(_) | SessionError::Reactants(_) | SessionError::Products(_) => {
                ApiError::bad_request(e)
            }
            SessionError::Parse(m) => m.into(),
            SessionError::Step(s) => s.into(),
            SessionError::Corrupt(_) | SessionError::Io(_) | SessionError::Json(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e)
            }
        }
    }
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

/// Engine work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
}

fn state_from(smiles: &str) -> Result<State, ApiError> {
    let g = parse_smiles(smiles)?;
    State::from_graph(&g).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph", e))
}

#[derive(Serialize)]
struct AtomOut {
    index: usize,
    map: Option<u32>,
    element: String,
    charge: i8,
    hydrogens: u32,
}

#[derive(Serialize)]
struct BondOut {
    a: usize,
    b: usize,
    order: u8,
}

fn atoms_out(g: &MolGraph) -> Vec<AtomOut> {
    g.atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| AtomOut { index: i, map: a.map, element: a.element.symbol().to_string(), charge: a.charge, hydrogens: g.total_h(i) })
        .collect()
}

fn bonds_out(g: &MolGraph) -> Vec<BondOut> {
    g.bonds().map(|((a, b), bond)| BondOut { a, b, order: bond.order }).collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParseReq {
    Smiles { smiles: String },
    MechSmiles { mechsmiles: String },
}

async fn parse(Extract(app): Extract<Shared>, req: Result<Json<ParseReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    blocking(move || match req {
        ParseReq::Smiles { smiles } => {
            let g = parse_smiles(&smiles)?;
            let state = State::from_graph(&g).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph", e))?;
            let report = validate(state.graph(), &app.engine.table)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph", e))?;
            Ok(Json(json!({
                "kind": "smiles",
                "canonical": state.canonical(),
                "mapped": state.smiles(&MapMode::All),
                "components": state.component_keys(),
                "formula": state.formula().to_string(),
                "total_charge": state.graph().total_charge(),
                "stable": report.is_stable(),
                "violations": report.violations,
                "atoms": atoms_out(state.graph()),
                "bonds": bonds_out(state.graph()),
            })))
        }
        ParseReq::MechSmiles { mechsmiles } => {
            let step = parse_mechsmiles(&mechsmiles)?;
            let host = State::from_graph(&step.host).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph", e))?;
            let product = app.engine.apply_step(&host, &step).map(|(s, _)| s.component_keys());
            Ok(Json(json!({
                "kind": "mechsmiles",
                "scope": step.scope(),
                "arrows": step.arrows,
                "minimal": step.serialize(Scope::Minimal),
                "equilibrated": step.serialize(Scope::Equilibrated),
                "product": product.as_ref().ok(),
                "product_error": product.as_ref().err().map(ToString::to_string),
            })))
        }
    })
    .await
}

#[derive(Deserialize)]
struct SmilesReq {
    smiles: String,
}

async fn layout_route(req: Result<Json<SmilesReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    blocking(move || {
        let state = state_from(&req.smiles)?;
        let g = state.graph();
        let points = layout(g);
        let atoms: Vec<Value> = atoms_out(g)
            .into_iter()
            .zip(points)
            .map(|(a, p)| {
                let mut v = serde_json::to_value(a).expect("atom serializes");
                v["x"] = json!(p.x);
                v["y"] = json!(p.y);
                v
            })
            .collect();
        Ok(Json(json!({"atoms": atoms, "bonds": bonds_out(g)})))
    })
    .await
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ApplyReq {
    MechSmiles { mechsmiles: String, state: Option<String> },
    Arrows { state: String, arrows: Vec<Arrow> },
}

fn state_json(engine: &Engine, state: &State) -> Value {
    let report = validate(state.graph(), &engine.table).unwrap_or_default();
    json!({
        "state": state.smiles(&MapMode::All),
        "canonical": state.canonical(),
        "components": state.component_keys(),
        "stable": report.is_stable(),
        "report": report,
    })
}

async fn apply(Extract(app): Extract<Shared>, req: Result<Json<ApplyReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    blocking(move || {
        let (state, arrows, next) = match req {
            ApplyReq::MechSmiles { mechsmiles, state } => {
                let step = parse_mechsmiles(&mechsmiles)?;
                let state = match state {
                    Some(s) => state_from(&s)?,
                    None => State::from_graph(&step.host).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph", e))?,
                };
                let (next, arrows) = app.engine.apply_step(&state, &step)?;
                (state, arrows, next)
            }
            ApplyReq::Arrows { state, arrows } => {
                let state = state_from(&state)?;
                let next = app.engine.apply(&state, &arrows)?;
                (state, arrows, next)
            }
        };
        let mut out = state_json(&app.engine, &next);
        out["arrows"] = json!(arrows);
        out["mechsmiles"] = json!(step_on(&state, &arrows).to_minimal());
        Ok(Json(out))
    })
    .await
}

#[derive(Deserialize)]
struct EnumerateReq {
    state: String,
    #[serde(default = "two")]
    max_arrows: usize,
    #[serde(default = "hundred")]
    limit: usize,
}

fn two() -> usize {
    2
}

fn hundred() -> usize {
    100
}

async fn enumerate(Extract(app): Extract<Shared>, req: Result<Json<EnumerateReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    if !(1..=4).contains(&req.max_arrows) {
        return Err(ApiError::bad_request("max_arrows must be between 1 and 4"));
    }
    blocking(move || {
        let state = state_from(&req.state)?;
        let moves = app.engine.enumerate(&state, &EnumOptions { max_arrows: req.max_arrows, ..Default::default() });
        let listed: Vec<Value> = moves
            .iter()
            .take(req.limit)
            .map(|m| {
                let product = app.engine.apply(&state, &m.arrows).map(|s| s.canonical()).ok();
                json!({
                    "arrows": m.arrows,
                    "mechsmiles": step_on(&state, &m.arrows).to_minimal(),
                    "product": product,
                })
            })
            .collect();
        Ok(Json(json!({"total": moves.len(), "moves": listed})))
    })
    .await
}

#[derive(Deserialize)]
struct InferReq {
    reactant: String,
    product: String,
}

async fn infer(Extract(app): Extract<Shared>, req: Result<Json<InferReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    blocking(move || {
        let r = parse_smiles(&req.reactant)?;
        let p = parse_smiles(&req.product)?;
        let inferred = infer_arrows(&app.engine, &r, &p, &InferOptions::default()).map_err(|e: ConvertError| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), &e)
        })?;
        Ok(Json(json!({
            "arrows": inferred.arrows,
            "reactant": inferred.reactant.smiles(&MapMode::All),
            "mechsmiles": step_on(&inferred.reactant, &inferred.arrows).to_minimal(),
            "product": inferred.product.canonical(),
        })))
    })
    .await
}

#[derive(Deserialize)]
struct SearchReq {
    reactants: String,
    product: String,
    #[serde(default)]
    config: SearchConfig,
}

async fn search(Extract(app): Extract<Shared>, req: Result<Json<SearchReq>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    req.config.check().map_err(ApiError::bad_request)?;
    blocking(move || {
        let initial = state_from(&req.reactants)?;
        let product = parse_smiles(&req.product)?;
        let v = validate_reaction(&app.engine, &initial, &product, app.policy.as_ref(), &req.config)
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "policy", e))?;
        let (steps, states): (Vec<String>, Vec<String>) = match &v.mechanism {
            Some(m) => (
                m.steps.iter().map(|s| s.to_minimal()).collect(),
                m.states().iter().map(|s| s.smiles(&MapMode::All)).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        Ok(Json(json!({
            "validated": v.validated,
            "policy": app.policy.name(),
            "report": v.report,
            "steps": steps,
            "states": states,
        })))
    })
    .await
}

async fn create_session(Extract(app): Extract<Shared>, req: Result<Json<NewSession>, JsonRejection>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req = body(req)?;
    let view = blocking(move || Ok(app.store.create(req)?.view())).await?;
    Ok((StatusCode::CREATED, Json(json!(view))))
}

async fn list_sessions(Extract(app): Extract<Shared>) -> Result<Json<Value>, ApiError> {
    let ids = blocking(move || Ok(app.store.list()?)).await?;
    Ok(Json(json!({"sessions": ids})))
}

async fn get_session(Extract(app): Extract<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    blocking(move || Ok(Json(json!(app.store.get(&id)?.view())))).await
}

async fn delete_session(Extract(app): Extract<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    blocking(move || Ok(app.store.delete(&id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn commit_step(
    Extract(app): Extract<Shared>,
    Path(id): Path<String>,
    req: Result<Json<StepInput>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let req = body(req)?;
    blocking(move || Ok(Json(json!(app.store.commit(&id, &req)?.view())))).await
}

async fn undo(Extract(app): Extract<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    blocking(move || Ok(Json(json!(app.store.undo(&id)?.view())))).await
}

async fn redo(Extract(app): Extract<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    blocking(move || Ok(Json(json!(app.store.redo(&id)?.view())))).await
}

#[derive(Deserialize)]
#[serde(default)]
struct ExportReq {
    tasks: Vec<u8>,
    retro: bool,
    forward: bool,
    no_product: bool,
}

impl Default for ExportReq {
    fn default() -> Self {
        ExportReq { tasks: vec![1, 2, 3, 4], retro: true, forward: true, no_product: true }
    }
}

async fn export(
    Extract(app): Extract<Shared>,
    Path(id): Path<String>,
    req: Option<Json<ExportReq>>,
) -> Result<Response, ApiError> {
    let req = req.map(|Json(r)| r).unwrap_or_default();
    let tasks = req
        .tasks
        .iter()
        .map(|&n| Task::from_number(n).ok_or_else(|| ApiError::bad_request(format!("no task {n}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let variants = Variants { retro: req.retro, forward: req.forward, no_product: req.no_product };
    let text = blocking(move || {
        let session = app.store.get(&id)?;
        let mut out = String::new();
        for task in tasks {
            let samples = build_samples(&session.mechanism, task, &variants)
                .map_err(|e| ApiError::new(StatusCode::CONFLICT, "conflict", e))?;
            for s in samples {
                out += &serde_json::to_string(&s).expect("sample serializes");
                out.push('\n');
            }
        }
        Ok(out)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/parse", post(parse))
        .route("/layout", post(layout_route))
        .route("/apply", post(apply))
        .route("/enumerate", post(enumerate))
        .route("/infer-arrows", post(infer))
        .route("/search", post(search))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/steps", post(commit_step))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/redo", post(redo))
        .route("/sessions/{id}/export", post(export))
        .with_state(state)
}

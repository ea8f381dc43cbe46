use std::path::Path;
use std::sync::Arc;

use arrowpush::corpus;
use arrowpush::engine::{Engine, State};
use arrowpush::mechanism::MechanismRecord;
use arrowpush::search::{best_first_search, Goal, GoalTest, HeuristicPolicy, Policy, ReplayPolicy, SearchConfig};
use arrowpush::search::{PolicyRequest, WireRequest, WireResponse};
use arrowpush::taskgen::{build_samples, Task, Variants};
use arrowpush_service::{router, AppState, HttpPolicy, SessionStore};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const HYDRIDE_STEP: &str = "[BH3-:2][H:3].[CH:4](CCCC(C)=O)=[O:1]|((2, 3), 4);((4, 1), 1)";

fn app(dir: &Path) -> Router {
    let engine = Engine::default();
    let store = SessionStore::open(dir, engine.clone()).unwrap();
    router(Arc::new(AppState { engine, store, policy: Arc::new(HeuristicPolicy::default()) }))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = call(app, method, uri, body).await;
    (s, serde_json::from_str(&text).unwrap_or(Value::Null))
}

fn borohydride_record() -> MechanismRecord {
    let line = include_str!("../../core/data/curated.jsonl").lines().next().unwrap();
    let rec: MechanismRecord = serde_json::from_str(line).unwrap();
    assert_eq!(rec.reaction_id, "borohydride-reduction");
    rec
}

#[tokio::test]
async fn apply_hydride_step() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/apply", Some(json!({"mechsmiles": HYDRIDE_STEP}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["components"], json!(["B", "CC(=O)CCCC[O-]"]));
    assert_eq!(v["stable"], json!(true));
    assert_eq!(v["report"]["violations"], json!([]));
}

#[tokio::test]
async fn apply_without_arrows_keeps_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let input = State::from_smiles("CC(=O)O.[OH-]").unwrap();
    let (s, v) = call_json(&app, "POST", "/apply", Some(json!({"state": "CC(=O)O.[OH-]", "arrows": []}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["canonical"], json!(input.canonical()));
}

#[tokio::test]
async fn invalid_arrow_is_unprocessable_with_engine_payload() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    // methane carbon has no lone pair
    let (s, v) = call_json(&app, "POST", "/apply", Some(json!({"state": "C.[H+]", "arrows": ["(1,6)"]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], json!("apply"));
    assert_eq!(v["detail"]["error"], json!("no_lone_pair"));
    let (s, v) = call_json(&app, "POST", "/apply", Some(json!({"state": "C", "arrows": ["(1,9)"]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["detail"]["error"], json!("unknown_map"));
}

#[tokio::test]
async fn parse_reports_positions_and_both_scopes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/parse", Some(json!({"smiles": "CC(=O"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], json!("smiles"));
    assert!(v["detail"]["offset"].is_number());
    let (s, v) = call_json(&app, "POST", "/parse", Some(json!({"smiles": "CC([O-])=O"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total_charge"], json!(-1));
    assert_eq!(v["atoms"].as_array().unwrap().len(), 7);
    let (s, v) = call_json(&app, "POST", "/parse", Some(json!({"mechsmiles": HYDRIDE_STEP}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["product"], json!(["B", "CC(=O)CCCC[O-]"]));
    assert!(v["minimal"].as_str().unwrap().len() <= v["equilibrated"].as_str().unwrap().len());
    let (s, _) = call_json(&app, "POST", "/parse", Some(json!({"mechsmiles": "CCO"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/parse", Some(json!({"neither": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn layout_is_deterministic_with_unit_bonds() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let body = json!({"smiles": "CC(=O)CCCC=O.O.O.[BH4-].[BH4-]"});
    let (s, a) = call_json(&app, "POST", "/layout", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let (_, b) = call_json(&app, "POST", "/layout", Some(body)).await;
    assert_eq!(a, b);
    let atoms = a["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 34);
    let xy = |i: u64| {
        let at = &atoms[i as usize];
        (at["x"].as_f64().unwrap(), at["y"].as_f64().unwrap())
    };
    for bond in a["bonds"].as_array().unwrap() {
        let (p, q) = (xy(bond["a"].as_u64().unwrap()), xy(bond["b"].as_u64().unwrap()));
        assert!(((p.0 - q.0).hypot(p.1 - q.1) - 1.0).abs() < 1e-3);
    }
    assert!(atoms.iter().all(|a| a["map"].is_u64()));
}

#[tokio::test]
async fn enumerate_and_infer() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/enumerate", Some(json!({"state": "[OH-].O", "max_arrows": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total"], json!(21));
    let (s, _) = call_json(&app, "POST", "/enumerate", Some(json!({"state": "O", "max_arrows": 9}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let body = json!({"reactant": "[CH3:1][Br:2].[OH-:3]", "product": "[CH3:1][OH:3].[Br-:2]"});
    let (s, v) = call_json(&app, "POST", "/infer-arrows", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["arrows"].as_array().unwrap().len(), 2);
    let (s, applied) = call_json(&app, "POST", "/apply", Some(json!({"mechsmiles": v["mechsmiles"]}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(applied["canonical"], v["product"]);
    let body = json!({"reactant": "[CH3:1][Br:2]", "product": "[CH3:1][Br:2].O"});
    let (s, _) = call_json(&app, "POST", "/infer-arrows", Some(body)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn session_export_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let rec = borohydride_record();
    let create = json!({
        "reaction_id": rec.reaction_id,
        "reactants": rec.initial_smiles,
        "products": "CC(O)CCCCO",
    });
    let (s, v) = call_json(&app, "POST", "/sessions", Some(create)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["session_id"].as_str().unwrap().to_string();
    assert_eq!(v["status"], json!("in-progress"));
    for (i, step) in rec.steps.iter().enumerate() {
        let (s, v) = call_json(&app, "POST", &format!("/sessions/{id}/steps"), Some(json!({"mechsmiles": step}))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        let want = if i + 1 == rec.steps.len() { "complete" } else { "in-progress" };
        assert_eq!(v["status"], json!(want));
    }
    let (s, text) = call(&app, "POST", &format!("/sessions/{id}/export"), None).await;
    assert_eq!(s, StatusCode::OK);

    let mech = corpus::curated_by_id(&Engine::default(), "borohydride-reduction").unwrap();
    let mut expected = String::new();
    for task in Task::ALL {
        for sample in build_samples(&mech, task, &Variants::default()).unwrap() {
            expected += &serde_json::to_string(&sample).unwrap();
            expected.push('\n');
        }
    }
    assert_eq!(text, expected);
    assert_eq!(text.lines().count(), 4 * 4 * 3);

    let (s, text) = call(&app, "POST", &format!("/sessions/{id}/export"), Some(json!({"tasks": [1], "forward": false, "no_product": false}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(text.lines().count(), 4);
}

#[tokio::test]
async fn undo_redo_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, v) = call_json(&app, "POST", "/sessions", Some(json!({"session_id": "sn2", "reactants": "CBr.[OH-]", "products": "CO"}))).await;
    assert_eq!(v["session_id"], json!("sn2"));
    let (s, _) = call_json(&app, "POST", "/sessions", Some(json!({"session_id": "sn2", "reactants": "C"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call_json(&app, "POST", "/sessions/sn2/undo", None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, v) = call_json(&app, "POST", "/sessions/sn2/steps", Some(json!({"arrows": ["(3,1)", "((1,2),2)"]}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], json!("complete"));
    let done = v["current"].clone();
    let (_, v) = call_json(&app, "POST", "/sessions/sn2/undo", None).await;
    assert_eq!(v["steps"], json!([]));
    assert_eq!(v["can_redo"], json!(true));
    assert_eq!(v["status"], json!("in-progress"));
    let (_, v) = call_json(&app, "POST", "/sessions/sn2/redo", None).await;
    assert_eq!(v["current"], done);
    let (s, _) = call_json(&app, "POST", "/sessions/sn2/redo", None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, v) = call_json(&app, "POST", "/sessions/sn2/steps", Some(json!({"arrows": ["(1,3)"]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (_, list) = call_json(&app, "GET", "/sessions", None).await;
    assert_eq!(list["sessions"], json!(["sn2"]));
    let (s, _) = call(&app, "DELETE", "/sessions/sn2", None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    for (m, uri) in [("GET", "/sessions/sn2"), ("POST", "/sessions/sn2/undo"), ("DELETE", "/sessions/sn2"), ("POST", "/sessions/nope/export")] {
        let (s, v) = call_json(&app, m, uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{m} {uri}");
        assert_eq!(v["error"], json!("not_found"));
    }
    let (s, _) = call_json(&app, "GET", "/sessions/..%2Fescape", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let rec = borohydride_record();
    let before = {
        let app = app(dir.path());
        call_json(&app, "POST", "/sessions", Some(json!({"session_id": "keep", "reactants": rec.initial_smiles}))).await;
        let (_, v) = call_json(&app, "POST", "/sessions/keep/steps", Some(json!({"mechsmiles": rec.steps[0]}))).await;
        v
    };
    let app = app(dir.path());
    let (s, after) = call_json(&app, "GET", "/sessions/keep", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(after, before);
    let files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files, vec!["keep.json".to_string()]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn commits_to_one_session_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call_json(&app, "POST", "/sessions", Some(json!({"session_id": "race", "reactants": "CBr.[OH-]"}))).await;
    let step = json!({"arrows": ["(3,1)", "((1,2),2)"]});
    let tasks: Vec<_> = (0..6)
        .map(|_| {
            let (app, step) = (app.clone(), step.clone());
            tokio::spawn(async move { call_json(&app, "POST", "/sessions/race/steps", Some(step)).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            s => assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY),
        }
    }
    assert_eq!(ok, 1);
    let (_, v) = call_json(&app, "GET", "/sessions/race", None).await;
    assert_eq!(v["steps"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn heuristic_search_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let rec = borohydride_record();
    let body = json!({"reactants": rec.initial_smiles, "product": "CC(O)CCCCO"});
    let (s, v) = call_json(&app, "POST", "/search", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["validated"], json!(true));
    assert!(v["report"]["expansions"].as_u64().unwrap() <= 50);
    assert_eq!(v["states"].as_array().unwrap().len(), v["steps"].as_array().unwrap().len() + 1);
    let bad = json!({"reactants": "CBr.[OH-]", "product": "CO", "config": {"budget": 0}});
    let (s, _) = call_json(&app, "POST", "/search", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

/// An HTTP policy backend serving replayed steps; the search runs on a
/// plain thread against it.
#[test]
fn http_policy_round_trip() {
    let engine = Engine::default();
    let mech = corpus::curated_by_id(&engine, "ester-saponification").unwrap();
    let replay = Arc::new(ReplayPolicy::new(std::slice::from_ref(&mech)));
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let backend = Router::new().route(
        "/propose",
        axum::routing::post(move |axum::Json(req): axum::Json<WireRequest>| {
            let replay = replay.clone();
            async move {
                let state = State::from_smiles(&req.state_mechsmiles_host).unwrap();
                let task = Task::from_number(req.task).unwrap();
                let proposals = replay.propose(&PolicyRequest { state: &state, goal: None, task, top_k: req.top_k }).unwrap();
                axum::Json(WireResponse { proposals })
            }
        }),
    );
    rt.spawn(async move { axum::serve(listener, backend).await.unwrap() });

    let policy = HttpPolicy::new(format!("http://{addr}/propose")).unwrap();
    let goal = Goal::from_state(mech.goal(), GoalTest::Exact);
    let out = best_first_search(&engine, &policy, &mech.initial, &goal, &SearchConfig::default()).unwrap();
    assert!(out.report.solved);
    assert_eq!(out.report.expansions, mech.steps.len());

    let dead = HttpPolicy::new("http://127.0.0.1:9/propose").unwrap();
    assert!(best_first_search(&engine, &dead, &mech.initial, &goal, &SearchConfig::default()).is_err());
}

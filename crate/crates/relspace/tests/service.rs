use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relspace::{service::router, session_setup};
use relspace_core::geometry::{Pose, Vec3};
use relspace_core::harness::{run_interaction, Environment, Mode, Task};
use relspace_core::memory::Memory;
use relspace_core::relation::{Demonstration, RelationModel};
use relspace_core::session::Session;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Session::new(session_setup(None, None, None, 7).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn position(state: &Value, id: &str) -> [f64; 3] {
    let inst = state["scene"]["instances"].as_array().unwrap().iter().find(|i| i["id"] == id).unwrap();
    serde_json::from_value(inst["position_m"].clone()).unwrap()
}

async fn teach(app: &Router, text: &str, id: &str, at: [f64; 3]) -> Value {
    let (status, out) = call(app, "POST", "/command", Some(json!({ "text": text }))).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let (status, _) = call(app, "POST", "/scene", Some(json!({ "id": id, "position_m": at }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, cue) = call(app, "POST", "/cue", None).await;
    assert_eq!(status, StatusCode::OK, "{cue}");
    out
}

#[tokio::test]
async fn command_query_cue_execute() {
    let app = app();
    let (_, state) = call(&app, "GET", "/state", None).await;
    let z = position(&state, "cup")[2];

    let first = teach(&app, "Put the cup to the right of the bowl.", "cup", [0.25, 0.0, z]).await;
    assert_eq!(first["status"], "query");
    assert_eq!(first["plan"]["status"], "no_model");
    assert!(first["utterance"].as_str().unwrap().contains("'right'"));

    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["demo_counts"]["right_of"], 1);
    assert_eq!(state["pending"], false);

    call(&app, "POST", "/scene", Some(json!({ "id": "cup", "position_m": [-0.5, -0.2, z] }))).await;
    let (status, again) =
        call(&app, "POST", "/command", Some(json!({ "text": "place the cup right of the bowl" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["status"], "executed");
    let (_, state) = call(&app, "GET", "/state", None).await;
    let p = position(&state, "cup");
    assert!((p[0] - 0.25).hypot(p[1]) < 0.03, "{p:?}");
    let log = state["log"].as_array().unwrap();
    assert_eq!(log.len(), 5);
    assert_eq!(log[0]["speaker"], "human");
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (status, body) = call(&app, "POST", "/command", Some(json!({ "text": "dance" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "NoRelationMatch");

    let (status, body) = call(&app, "POST", "/command", Some(json!({ "text": "put the piano near the bowl" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, body) = call(&app, "POST", "/scene", Some(json!({ "id": "piano", "position_m": [0, 0, 1] }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownObject");

    let (status, body) = call(&app, "POST", "/cue", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "NoCommandContext");

    let (status, body) = call(&app, "GET", "/model/near/heatmap?grid=8x8", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "NoModel");

    let (status, _) = call(&app, "GET", "/model/near", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = call(&app, "GET", "/model/near/heatmap?grid=big", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidGrid");

    let (status, body) = call(
        &app,
        "POST",
        "/scene",
        Some(json!({ "id": "cup", "position_m": [0, 0, 1], "orientation_wxyz": [0, 0, 0, 0] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidGeometry");
}

#[tokio::test]
async fn heatmap_and_reset() {
    let app = app();
    let (_, state) = call(&app, "GET", "/state", None).await;
    let z = position(&state, "jar")[2];
    // one demonstration gives a spike narrower than a grid cell, so spread a few
    for at in [[0.0, 0.3, z], [0.06, 0.25, z], [-0.05, 0.34, z], [0.02, 0.22, z]] {
        teach(&app, "put the jar behind the bowl", "jar", at).await;
    }

    let (status, map) = call(&app, "GET", "/model/behind/heatmap?grid=32x20", None).await;
    assert_eq!(status, StatusCode::OK);
    let values: Vec<f64> = serde_json::from_value(map["values"].clone()).unwrap();
    assert_eq!(values.len(), 32 * 20);
    let (argmax, max) = values.iter().enumerate().fold((0, f64::MIN), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
    assert!(max > 0.0);
    // row 0 is the front edge; the peak must be in the back half
    assert!(argmax / 32 >= 10, "peak row {}", argmax / 32);

    let (status, state) = call(&app, "POST", "/reset", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["demo_counts"]["behind"], 0);
    assert_eq!(state["clock"], 0);
    let (status, _) = call(&app, "GET", "/model/behind", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

/// The service and the batch harness learn the same model from the same demonstrations.
#[tokio::test]
async fn service_model_matches_harness() {
    let setup = session_setup(None, None, None, 7).unwrap();
    let app = router(Session::new(setup.clone()));
    let text = "put the cup to the right of the bowl";
    let command = setup.grounding.ground(text, &setup.scene).unwrap();
    let z = setup.scene.pose("cup").unwrap().position.z;
    let spots = [[0.25, 0.02, z], [0.3, -0.04, z], [0.22, 0.06, z]];

    for at in spots {
        call(&app, "POST", "/scene", Some(json!({ "id": "cup", "position_m": [-0.5, -0.2, z] }))).await;
        teach(&app, text, "cup", at).await;
    }
    let (status, served) = call(&app, "GET", "/model/right_of", None).await;
    assert_eq!(status, StatusCode::OK);

    let demo = |at: [f64; 3], t: f64| {
        let mut before = setup.scene.clone();
        before.timestamp = t;
        let orientation = before.pose("cup").unwrap().orientation;
        let mut after = before.clone().with("cup", Pose::new(Vec3::from(at), orientation));
        after.timestamp = t + 1.0;
        Demonstration { scene_before: before, command: command.clone(), scene_after: after }
    };
    let demos: Vec<_> = spots.iter().enumerate().map(|(i, at)| demo(*at, 2.0 * i as f64)).collect();

    // first demonstration through the harness loop, the rest as corrections
    let env = Environment { catalog: setup.catalog.clone(), workspace: setup.workspace, config: setup.config };
    let mut memory = Memory::new([(command.relation.clone(), vec![])]);
    let record = run_interaction(&mut memory, &env, &Task::from(&demos[0]), &demos[0], Mode::Learned, 1).unwrap();
    assert!(record.demo_given);
    for d in &demos[1..] {
        memory.learn(d, &env.catalog).unwrap();
    }
    let expected = serde_json::to_value(memory.model("right_of").unwrap()).unwrap();
    assert_eq!(served, expected);

    let mut direct = RelationModel::new("right_of");
    for d in &demos {
        direct.update_incremental(d, &env.catalog).unwrap();
    }
    assert_eq!(served, serde_json::to_value(&direct).unwrap());
}

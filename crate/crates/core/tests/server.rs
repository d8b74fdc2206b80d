use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rawsea::review::{read_log, replay, Outcome, StorePaths};
use rawsea::server::{bind, router, AppState, ServeConfig, ServeError};
use rawsea::synth::{synth_dataset, write_dataset, SynthConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    annotations: PathBuf,
    ais: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_dataset(11, 2, &SynthConfig::default());
    write_dataset(&scenes, dir.path()).unwrap();
    let annotations = dir.path().join("review.json");
    std::fs::copy(dir.path().join("truth.json"), &annotations).unwrap();
    Fixture {
        root: dir.path().join("granules"),
        ais: dir.path().join("ais.csv"),
        annotations,
        _dir: dir,
    }
}

fn state(f: &Fixture) -> AppState {
    let mut cfg = ServeConfig::new(&f.annotations, &f.root);
    cfg.ais = Some(f.ais.clone());
    AppState::open(cfg).unwrap()
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get_json(app: &axum::Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post_decision(app: &axum::Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/decisions")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn decision(granule: &str, box_id: u64, action: Value, base: u64, reviewer: &str) -> Value {
    let mut v = json!({
        "granule_id": granule,
        "box_id": box_id,
        "reviewer": reviewer,
        "decided_at": "2021-06-02T09:00:00Z",
        "base_revision": base,
    });
    for (k, x) in action.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

#[tokio::test]
async fn empty_root_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("empty.json");
    std::fs::write(&ann, rawsea::aiscoco::to_canonical_string(&rawsea::aiscoco::AiscocoDoc::empty()).unwrap()).unwrap();
    let app = router(AppState::open(ServeConfig::new(&ann, dir.path().join("missing"))).unwrap());
    let (s, v) = get_json(&app, "/api/granules").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!([]));
}

#[tokio::test]
async fn granule_listing_and_band_png() {
    let f = fixture();
    let app = router(state(&f));
    let (s, v) = get_json(&app, "/api/granules").await;
    assert_eq!(s, StatusCode::OK);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["id"], "synth_000");
    assert_eq!(list[0]["bands"], json!(["B02", "B03", "B04", "B08"]));

    let (s, v) = get_json(&app, "/api/granules/synth_001").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["width"], 256);

    let (s, body) = call(&app, Request::get("/api/granules/synth_000/band/B04.png").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(&body[..8], b"\x89PNG\r\n\x1a\n");

    let (s, _) = call(&app, Request::get("/api/granules/synth_000/band/B99.png").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(
        &app,
        Request::get("/api/granules/synth_000/band/B04.png?lo=90&hi=10").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get_json(&app, "/api/granules/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn annotations_and_candidates() {
    let f = fixture();
    let app = router(state(&f));
    let (s, v) = get_json(&app, "/api/granules/synth_000/annotations").await;
    assert_eq!(s, StatusCode::OK);
    let anns = v["annotations"].as_array().unwrap();
    assert!(!anns.is_empty());
    for a in anns {
        assert_eq!(a["status"], "matched");
        assert_eq!(a["revision"], 0);
    }
    let (s, v) = get_json(&app, "/api/granules/synth_000/candidates").await;
    assert_eq!(s, StatusCode::OK);
    let boxes = v["boxes"].as_array().unwrap();
    assert_eq!(boxes.len(), anns.len());
    // every truth vessel sees its own MMSI among the candidates
    for (b, a) in boxes.iter().zip(anns) {
        let mmsi = &a["attributes"]["mmsi"];
        assert!(
            b["candidates"].as_array().unwrap().iter().any(|c| &c["mmsi"] == mmsi),
            "box {} lacks candidate {mmsi}",
            b["box_id"]
        );
    }
}

#[tokio::test]
async fn accept_then_conflict_then_replay() {
    let f = fixture();
    let app = router(state(&f));
    let (_, v) = get_json(&app, "/api/granules/synth_000/annotations").await;
    let box_id = v["annotations"][0]["id"].as_u64().unwrap();

    let (s, v) = post_decision(&app, decision("synth_000", box_id, json!({"action": "accept"}), 0, "ana")).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "accepted");
    assert_eq!(v["revision"], 1);

    // a second reviewer working from the stale revision
    let (s, v) = post_decision(&app, decision("synth_000", box_id, json!({"action": "reject"}), 0, "bo")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "conflict");
    assert_eq!(v["current_revision"], 1);

    let (_, v) = get_json(&app, "/api/granules/synth_000/annotations").await;
    let a = v["annotations"].as_array().unwrap().iter().find(|a| a["id"] == box_id).unwrap().clone();
    assert_eq!(a["status"], "accepted");

    let paths = StorePaths::for_annotations(&f.annotations);
    let log = read_log(&paths.log).unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].outcome, Outcome::Applied);
    assert_eq!(log[1].outcome, Outcome::Conflict);
    assert_eq!(log[1].decision.reviewer, "bo");

    let original = rawsea::aiscoco::read_aiscoco(&f.annotations).unwrap();
    let rebuilt = replay(&original, &log, &Default::default()).unwrap();
    let on_disk = rawsea::aiscoco::read_aiscoco(&paths.reviewed).unwrap();
    assert_eq!(
        rawsea::aiscoco::to_canonical_string(&rebuilt).unwrap(),
        rawsea::aiscoco::to_canonical_string(&on_disk).unwrap()
    );
}

#[tokio::test]
async fn reassign_rules() {
    let f = fixture();
    let app = router(state(&f));
    let (_, v) = get_json(&app, "/api/granules/synth_000/annotations").await;
    let anns = v["annotations"].as_array().unwrap();
    let (a0, a1) = (anns[0]["id"].as_u64().unwrap(), &anns[1]);

    // MMSI held by another box
    let taken = a1["attributes"]["mmsi"].as_u64().unwrap();
    let (s, _) = post_decision(&app, decision("synth_000", a0, json!({"action": "reassign", "mmsi": taken}), 0, "ana")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    // MMSI with no record near this granule
    let (s, _) = post_decision(&app, decision("synth_000", a0, json!({"action": "reassign", "mmsi": 111111111}), 0, "ana")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    // free it, then take it
    let a1id = a1["id"].as_u64().unwrap();
    let (s, _) = post_decision(&app, decision("synth_000", a1id, json!({"action": "reject"}), 0, "ana")).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = post_decision(&app, decision("synth_000", a0, json!({"action": "reassign", "mmsi": taken}), 0, "ana")).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "reassigned");
    assert_eq!(v["annotation"]["attributes"]["mmsi"], taken);
    assert!(!v["annotation"]["attributes"]["route"].as_array().unwrap().is_empty());

    let (s, _) = post_decision(&app, decision("synth_000", 9999, json!({"action": "accept"}), 0, "ana")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post_decision(&app, decision("synth_000", a0, json!({"action": "accept"}), 1, " ")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn state_survives_restart() {
    let f = fixture();
    let box_id;
    {
        let app = router(state(&f));
        let (_, v) = get_json(&app, "/api/granules/synth_001/annotations").await;
        box_id = v["annotations"][0]["id"].as_u64().unwrap();
        let (s, _) = post_decision(&app, decision("synth_001", box_id, json!({"action": "reject"}), 0, "ana")).await;
        assert_eq!(s, StatusCode::OK);
    }
    let app = router(state(&f));
    let (_, v) = get_json(&app, "/api/granules/synth_001/annotations").await;
    let a = v["annotations"].as_array().unwrap().iter().find(|a| a["id"] == box_id).unwrap().clone();
    assert_eq!(a["status"], "rejected");
    assert_eq!(a["revision"], 1);
    assert!(a["attributes"].get("mmsi").is_none());
}

#[tokio::test]
async fn second_server_on_same_store_is_refused() {
    let f = fixture();
    let _first = state(&f);
    let mut cfg = ServeConfig::new(&f.annotations, &f.root);
    cfg.ais = Some(f.ais.clone());
    assert!(matches!(AppState::open(cfg), Err(ServeError::StoreLocked(_))));
}

#[tokio::test]
async fn port_in_use() {
    let l = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = l.local_addr().unwrap();
    match bind(addr).await {
        Err(ServeError::PortInUse(p)) => assert_eq!(p, addr.port()),
        other => panic!("expected PortInUse, got {other:?}"),
    }
}

#[tokio::test]
async fn live_server_answers() {
    let f = fixture();
    let l = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = l.local_addr().unwrap();
    let app = router(state(&f));
    tokio::spawn(async move { axum::serve(l, app).await.unwrap() });
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    s.write_all(b"GET /api/granules HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    assert!(buf.contains("synth_000"));
}

#[test]
fn store_override() {
    let cfg = ServeConfig::new("a.json", "root").with_store_override(Some("b.json".into()));
    assert_eq!(cfg.annotations, Path::new("b.json"));
    let cfg = ServeConfig::new("a.json", "root").with_store_override(Some(String::new()));
    assert_eq!(cfg.annotations, Path::new("a.json"));
}

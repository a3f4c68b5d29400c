use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use facetmag::service::{router, AppState};
use facetmag_core::{fixtures, store};

fn seeded(root: &Path) -> Router {
    store::save_dimension(&fixtures::gender(), &root.join("gender.dim.json")).unwrap();
    store::save_dimension(&fixtures::ses(), &root.join("ses.dim.json")).unwrap();
    store::save_use_case(&fixtures::checkout(), &root.join("checkout.usecase.json")).unwrap();
    std::fs::write(root.join("base.rules"), fixtures::BASE_RULES).unwrap();
    router(AppState::new(root), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body.to_string())).await
}

fn judgment(version: u64, facet: &str, side: &str, state: &str) -> Value {
    json!({
        "expected_version": version,
        "state_id": state,
        "facet_id": facet,
        "side": side,
        "issues": [{"code": "confusing", "message": "label is unclear"}],
        "author": "ana",
        "timestamp": "2026-05-01T10:00:00Z",
    })
}

#[tokio::test]
async fn verify_fixture_pair_is_equal() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    let (status, body) = post(
        &app,
        "/verify",
        json!({"dimensions": ["gender", "ses"], "use_case": "checkout", "rules": "base"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["payload"]["equal"], true);
    assert_eq!(body["payload"]["diff"], json!([]));
    assert_eq!(body["payload"]["joined_invocations"], 64);
}

#[tokio::test]
async fn stale_judgment_gets_409_with_current_version() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    let (status, body) = post(
        &app,
        "/sessions",
        json!({"id": "s1", "dimensions": ["gender"], "use_case": "checkout"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["version"], 1);

    let (status, body) = post(&app, "/sessions/s1/judgments", judgment(1, "motivations", "MIN", "browse")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], 2);

    let (status, body) = post(&app, "/sessions/s1/judgments", judgment(1, "motivations", "MAX", "browse")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["status"], "error");
    assert_eq!(body["error"]["code"], "version_conflict");
    assert_eq!(body["version"], 2);
    assert!(body.get("payload").is_none());

    // refetch and retry
    let (_, snapshot) = call(&app, "GET", "/sessions/s1", None).await;
    let v = snapshot["payload"]["version"].as_u64().unwrap();
    let (status, _) = post(&app, "/sessions/s1/judgments", judgment(v, "motivations", "MAX", "browse")).await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = call(&app, "GET", "/sessions/s1/result", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["payload"]["issues"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn one_of_two_concurrent_judgments_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    post(&app, "/sessions", json!({"id": "race", "dimensions": ["ses"], "use_case": "checkout"})).await;
    let a = post(&app, "/sessions/race/judgments", judgment(1, "attitude-toward-risk", "MIN", "payment"));
    let b = post(&app, "/sessions/race/judgments", judgment(1, "attitude-toward-risk", "MAX", "payment"));
    let ((sa, _), (sb, _)) = tokio::join!(a, b);
    let mut statuses = [sa, sb];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
    let events = store::read_session_events(&dir.path().join("race.session.jsonl")).unwrap();
    assert_eq!(events.len(), 2);
}

#[tokio::test]
async fn session_errors_map_to_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    post(&app, "/sessions", json!({"id": "s2", "dimensions": ["gender"], "use_case": "checkout"})).await;
    // facet outside the session's dimensions
    let (status, body) = post(&app, "/sessions/s2/judgments", judgment(1, "pace-preference", "MIN", "browse")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "out_of_scope");

    let (status, _) = post(
        &app,
        "/sessions/s2/close",
        json!({"expected_version": 1, "author": "ana", "timestamp": "2026-05-01T11:00:00Z"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = post(&app, "/sessions/s2/judgments", judgment(2, "motivations", "MIN", "browse")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "session_closed");

    let (status, body) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");

    let (status, body) = post(&app, "/sessions/s2/judgments", json!({"expected_version": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "schema");
}

#[tokio::test]
async fn scale_conflict_is_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    let doc = json!({
        "format_version": 1, "id": "clash", "label": "Clash",
        "facets": [{"id": "computer-self-efficacy", "label": "CSE", "scale": ["high", "low"]}],
    });
    let (status, body) = post(&app, "/dimensions", doc).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "scale_conflict");
    assert!(!dir.path().join("clash.dim.json").exists());

    let (status, body) = post(&app, "/dimensions", json!({"format_version": 1, "id": "x", "label": "X", "facets": [{"id": "a", "label": "A"}]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"]["message"].as_str().unwrap().contains("facets[0]"), "{body}");
}

#[tokio::test]
async fn catalogs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    let (status, body) = call(&app, "GET", "/dimensions", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["payload"].as_array().unwrap().iter().map(|d| d["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["gender", "ses"]);

    let age: Value = serde_json::from_str(fixtures::AGE_DIM).unwrap();
    let (status, _) = post(&app, "/dimensions", age).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(std::fs::read_to_string(dir.path().join("age.dim.json")).unwrap(), fixtures::AGE_DIM);

    let (status, body) = call(&app, "GET", "/usecases", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["payload"][0]["id"], "checkout");

    let (status, body) = call(
        &app,
        "POST",
        "/rulesets?id=extra",
        Some("rule a: facet motivations MIN when has(help_available) => \"x\"\n".into()),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let (_, body) = call(&app, "GET", "/rulesets", None).await;
    assert_eq!(body["payload"].as_array().unwrap().len(), 2);
    let (status, body) = call(&app, "POST", "/rulesets?id=bad", Some("rule a: facet x MIDDLE".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "parse_error");
}

#[tokio::test]
async fn evaluate_merge_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    for d in ["gender", "ses"] {
        let (status, _) = post(
            &app,
            "/results/evaluate",
            json!({"dimension": d, "use_case": "checkout", "rules": "base", "save_as": d}),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, body) = call(&app, "GET", "/results/gender/coverage", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["payload"]["density"], 1.0);
    assert_eq!(body["payload"]["cells"], 40);

    let (status, merged) = post(&app, "/results/merge", json!({"results": ["gender", "ses"], "save_as": "both"})).await;
    assert_eq!(status, StatusCode::OK);
    post(&app, "/dimensions/join", json!({"dimensions": ["gender", "ses"], "save": true})).await;
    let (_, joined) = post(
        &app,
        "/results/evaluate",
        json!({"dimension": "gender+ses", "use_case": "checkout", "rules": "base"}),
    )
    .await;
    assert_eq!(merged["payload"], joined["payload"]);

    let (status, _) = call(&app, "GET", "/results/missing/coverage", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_merge_with_engine_results() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    post(&app, "/sessions", json!({"id": "s3", "dimensions": ["gender"], "use_case": "checkout"})).await;
    post(&app, "/sessions/s3/judgments", judgment(1, "motivations", "MIN", "browse")).await;
    post(
        &app,
        "/results/evaluate",
        json!({"dimension": "ses", "use_case": "checkout", "rules": "base", "save_as": "ses"}),
    )
    .await;
    let (status, body) = post(&app, "/results/merge", json!({"results": ["ses"], "sessions": ["s3"]})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let sources = body["payload"]["inputs"]["sources"].as_array().unwrap();
    assert_eq!(sources.len(), 2);
}

#[tokio::test]
async fn get_endpoints_do_not_write() {
    let dir = tempfile::tempdir().unwrap();
    let app = seeded(dir.path());
    post(&app, "/sessions", json!({"id": "s4", "dimensions": ["gender"], "use_case": "checkout"})).await;
    let before: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.clone(), std::fs::read(p).unwrap())
        })
        .collect();
    for uri in ["/dimensions", "/usecases", "/rulesets", "/rulesets/base", "/sessions/s4", "/sessions/s4/result"] {
        let (status, _) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
    }
    for (p, bytes) in before {
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 5);
}

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dg_core::record::read_csv;
use dg_core::{plan_rounds, signal_for, CostScheme, GameConfig, ServerKind, Stage, CSV_HEADER};
use dg_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(key) = key {
        req = req.header("Idempotency-Key", key);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body, None).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, reply) = call_json(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{reply}");
    reply["session_id"].as_str().unwrap().to_string()
}

/// Words that would give away kinds or costs before the attack resolves.
fn leaks(text: &str) -> bool {
    ["\"regular\"", "\"honeypot\"", "cost", "payoff", "kind", "total", "deception", "cumulative", "seed"]
        .iter()
        .any(|w| text.contains(w))
}

#[tokio::test]
async fn create_shows_round_one_of_thirty() {
    let app = router(AppState::in_memory());
    let (status, reply) = call_json(&app, "POST", "/sessions", Some(json!({"condition": "increasing"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let state = &reply["state"];
    assert_eq!(state["num_servers"], 4);
    assert_eq!(state["round"], 1);
    assert_eq!(state["num_rounds"], 30);
    assert_eq!(state["condition"], "increasing");
    assert_eq!(state["probe_budget"], Value::Null);
    assert!(!leaks(&reply.to_string()), "{reply}");

    let other = create(&app, json!({"condition": "increasing"})).await;
    assert_ne!(other, reply["session_id"].as_str().unwrap());
}

#[tokio::test]
async fn bad_requests_get_json_errors() {
    let app = router(AppState::in_memory());
    let (status, reply) = call_json(&app, "POST", "/sessions", Some(json!({"condition": "free"}))).await;
    assert!(status.is_client_error());
    assert_eq!(reply["code"], "unknown_condition");
    assert!(reply["message"].as_str().unwrap().contains("free"));

    let (status, reply) = call_json(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(reply["code"], "not_found");

    let id = create(&app, json!({"condition": "no-cost"})).await;
    let (status, reply) = call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": 9}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(reply["code"], "unknown_server");

    let (status, bytes) = call(&app, "POST", &format!("/sessions/{id}/probe"), None, None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
}

#[tokio::test]
async fn probe_returns_signal_per_game_rules() {
    let seed = 11;
    let plans = plan_rounds(&GameConfig::new(CostScheme::ConstantCost, seed)).unwrap();
    let app = router(AppState::in_memory());
    let id = create(&app, json!({"condition": "constant", "seed": seed})).await;
    for server in 0..4 {
        let (status, reply) =
            call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": server}))).await;
        assert_eq!(status, StatusCode::OK);
        let expected = signal_for(plans[0].server_kinds[server], plans[0].is_deception);
        assert_eq!(reply["signal"], json!(expected));
        assert!(!leaks(&reply.to_string()), "{reply}");
    }
    let (_, reply) = call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": null}))).await;
    assert_eq!(reply["signal"], Value::Null);
    assert_eq!(reply["state"]["probes"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn budget_is_enforced_when_set() {
    let app = router(AppState::in_memory());
    let id = create(&app, json!({"condition": "no-cost", "probe_budget": 2})).await;
    let uri = format!("/sessions/{id}/probe");
    for _ in 0..2 {
        assert_eq!(call_json(&app, "POST", &uri, Some(json!({"server": 0}))).await.0, StatusCode::OK);
    }
    let (status, reply) = call_json(&app, "POST", &uri, Some(json!({"server": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(reply["code"], "budget_exhausted");
}

#[tokio::test]
async fn attack_reveals_costs_and_withdraw_scores_zero() {
    let seed = 5;
    let plans = plan_rounds(&GameConfig::new(CostScheme::IncreasingCost, seed)).unwrap();
    let app = router(AppState::in_memory());
    let id = create(&app, json!({"condition": "increasing", "seed": seed})).await;

    let (_, reply) = call_json(&app, "POST", &format!("/sessions/{id}/attack"), Some(json!({"server": null}))).await;
    assert_eq!(reply["outcome"]["total"], 0);
    assert_eq!(reply["outcome"]["attack"], Value::Null);
    assert_eq!(reply["state"]["round"], 2);

    // round 2: probe both honeypots, then attack a regular server
    let kinds = &plans[1].server_kinds;
    let honeypots: Vec<usize> = (0..4).filter(|&s| kinds[s] == ServerKind::Honeypot).collect();
    let regular = (0..4).find(|&s| kinds[s] == ServerKind::Regular).unwrap();
    for &h in &honeypots {
        call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": h}))).await;
    }
    let (_, reply) = call_json(&app, "POST", &format!("/sessions/{id}/attack"), Some(json!({"server": regular}))).await;
    let outcome = &reply["outcome"];
    assert_eq!(outcome["round"], 2);
    assert_eq!(outcome["attack_payoff"], 10);
    assert_eq!(outcome["probe_costs"], json!([-5, -10]));
    assert_eq!(outcome["total"], -5);
    assert_eq!(outcome["cumulative"], -5);
    assert_eq!(outcome["revealed_kinds"][honeypots[0].to_string()], "honeypot");
    assert_eq!(outcome["revealed_kinds"][regular.to_string()], "regular");
}

#[tokio::test]
async fn full_session_exports_harness_csv() {
    let app = router(AppState::in_memory());
    let id = create(&app, json!({"condition": "constant", "seed": 3})).await;
    let (status, reply) = call_json(&app, "GET", &format!("/sessions/{id}/export"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(reply["code"], "session_open");

    let mut probes_taken = 0;
    let mut last = Value::Null;
    for round in 0..30 {
        for p in 0..(round % 3) {
            call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": p}))).await;
            probes_taken += 1;
        }
        let (status, reply) =
            call_json(&app, "POST", &format!("/sessions/{id}/attack"), Some(json!({"server": round % 4}))).await;
        assert_eq!(status, StatusCode::OK);
        last = reply;
    }
    assert_eq!(last["state"]["finished"], true);
    assert_eq!(last["summary"]["rounds"], 30);
    assert_eq!(last["summary"]["cumulative_score"], last["outcome"]["cumulative"]);

    let (status, reply) = call_json(&app, "POST", &format!("/sessions/{id}/attack"), Some(json!({"server": 0}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(reply["code"], "session_finished");

    let (status, csv) = call(&app, "GET", &format!("/sessions/{id}/export"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert!(!text.contains('\r'));
    let records = read_csv(csv.as_slice()).unwrap();
    assert_eq!(records.len(), 30 + probes_taken);
    assert_eq!(records.iter().filter(|r| r.stage == Stage::Attack).count(), 30);
    assert_eq!(records.iter().filter(|r| r.deception).map(|r| r.trial).collect::<std::collections::BTreeSet<_>>().len(), 15);
    assert_eq!(records.last().unwrap().cumulative, last["summary"]["cumulative_score"].as_i64().unwrap());

    let (_, again) = call(&app, "GET", &format!("/sessions/{id}/export"), None, None).await;
    assert_eq!(again, csv);
}

#[tokio::test]
async fn idempotency_key_prevents_double_actions() {
    let app = router(AppState::in_memory());
    let id = create(&app, json!({"condition": "no-cost"})).await;
    let uri = format!("/sessions/{id}/probe");
    let first = call(&app, "POST", &uri, Some(json!({"server": 1})), Some("k1")).await;
    let retry = call(&app, "POST", &uri, Some(json!({"server": 1})), Some("k1")).await;
    assert_eq!(first, retry);
    let (_, state) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state["state"]["probes"].as_array().unwrap().len(), 1);

    let uri = format!("/sessions/{id}/attack");
    let first = call(&app, "POST", &uri, Some(json!({"server": 1})), Some("a1")).await;
    let retry = call(&app, "POST", &uri, Some(json!({"server": 1})), Some("a1")).await;
    assert_eq!(first, retry);
    let (_, state) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state["state"]["round"], 2);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(dir.path()).unwrap());
    let id = create(&app, json!({"condition": "increasing"})).await;
    call(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": 2})), Some("p")).await;
    call_json(&app, "POST", &format!("/sessions/{id}/attack"), Some(json!({"server": 2}))).await;
    call_json(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": 0}))).await;
    let (_, before) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;

    let restarted = AppState::open(dir.path()).unwrap();
    assert_eq!(restarted.session_count(), 1);
    let app = router(restarted);
    let (_, after) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
    assert_eq!(after["state"]["round"], 2);

    // the replayed idempotency cache still answers old keys
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/probe"), Some(json!({"server": 2})), Some("p")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, after_retry) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(after, after_retry);
}

/// Plays over a real socket and checks nothing before the attack reply
/// mentions kinds or costs.
#[tokio::test]
async fn wire_level_delayed_feedback() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::in_memory())).await.unwrap() });

    async fn raw(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> (u16, String) {
        let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
        let request = format!(
            "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(request.as_bytes()).await.unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).await.unwrap();
        let status = response[9..12].parse().unwrap();
        let body = response.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
        (status, body)
    }

    let (status, body) = raw(addr, "POST", "/sessions", r#"{"condition":"increasing"}"#).await;
    assert_eq!(status, 201);
    assert!(!leaks(&body), "{body}");
    let id = serde_json::from_str::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string();
    for round in 0..3 {
        for server in 0..4 {
            let (status, body) = raw(addr, "POST", &format!("/sessions/{id}/probe"), &format!(r#"{{"server":{server}}}"#)).await;
            assert_eq!(status, 200);
            // the last outcome is already resolved; everything else must be silent
            let mut reply: Value = serde_json::from_str(&body).unwrap();
            reply["state"]["last_outcome"] = Value::Null;
            assert!(!leaks(&reply.to_string()), "round {round}: {reply}");
        }
        let (status, body) = raw(addr, "POST", &format!("/sessions/{id}/attack"), r#"{"server":null}"#).await;
        assert_eq!(status, 200);
        assert!(body.contains("probe_costs") && body.contains("revealed_kinds"));
    }
}

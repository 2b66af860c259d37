#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::{Json, Router};
use cascade::service::{AppState, BackendRequest, BackendResponse, BackendRole, BackendSpec, ServiceConfig};
use cascade_core::calibration::RoutingPolicy;
use tokio::net::TcpListener;

pub type Handler = Arc<dyn Fn(&str) -> BackendResponse + Send + Sync>;

/// Starts an in-process backend answering `/predict` with `handler(input)`.
pub async fn spawn_stub(handler: Handler) -> String {
    let app = Router::new()
        .route(
            "/predict",
            post(move |Json(req): Json<BackendRequest>| {
                let handler = handler.clone();
                async move { Json(handler(&req.input)) }
            }),
        )
        .route("/healthz", get(|| async { "ok" }));
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}")
}

/// An address nothing listens on.
pub async fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

pub fn binary(prediction: &str, p_first: f64) -> BackendResponse {
    BackendResponse {
        prediction: prediction.to_string(),
        probs: Some(vec![p_first, 1.0 - p_first]),
        labels: Some(vec!["a".into(), "b".into()]),
        tokens: None,
    }
}

pub fn prediction_only(prediction: &str) -> BackendResponse {
    BackendResponse { prediction: prediction.to_string(), probs: None, labels: None, tokens: None }
}

pub fn spec(name: &str, url: &str, role: BackendRole) -> BackendSpec {
    BackendSpec { name: name.into(), url: url.into(), timeout: 2000, role }
}

pub fn config(policy: RoutingPolicy, small: BackendSpec, large: BackendSpec, committee: Vec<BackendSpec>) -> ServiceConfig {
    ServiceConfig { policy, small, large, committee, listen: "127.0.0.1:0".into() }
}

/// Starts the router for `config` and returns its base URL.
pub async fn start_router(config: &ServiceConfig) -> (String, AppState) {
    let state = AppState::new(config);
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let (addr, _handle): (SocketAddr, _) = cascade::service::spawn(listener, state.clone()).unwrap();
    (format!("http://{addr}"), state)
}

pub fn cascade_bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_cascade"))
}

/// Writes a small synthetic dataset (three runs per size) under `dir`.
pub fn synth_dataset(dir: &std::path::Path) {
    let config = dir.join("synth.json");
    std::fs::write(
        &config,
        r#"{"n_examples": 400, "committee_size": 3, "large_advantage": 1.0, "certain_regression": 0.2}"#,
    )
    .unwrap();
    let status = cascade_bin()
        .args(["synth", "--seed", "7", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("data"))
        .output()
        .unwrap();
    assert!(status.status.success());
}

/// One invocation of every file-producing subcommand against `synth_dataset`
/// output in `data`, writing into `out`. Returns (name, args, output path).
pub fn every_subcommand(data: &std::path::Path, out: &std::path::Path) -> Vec<(&'static str, Vec<String>, std::path::PathBuf)> {
    let p = |name: &str| data.join(name).display().to_string();
    let s0 = p("small-0.jsonl");
    let s1 = p("small-1.jsonl");
    let s2 = p("small-2.jsonl");
    let l0 = p("large-0.jsonl");
    let l1 = p("large-1.jsonl");
    let pair = |extra: &[&str]| {
        let mut v: Vec<String> = vec!["--small".into(), s0.clone(), "--large".into(), l0.clone()];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let cases: Vec<(&'static str, Vec<String>, &str)> = vec![
        ("score", vec!["--small".into(), s0.clone(), "--kind".into(), "entropy".into()], "score.csv"),
        ("curve", pair(&[]), "curve.csv"),
        ("hump", pair(&["--kind", "churn", "--committee", &s1, "--committee", &s2]), "hump.csv"),
        ("concavity", pair(&[]), "concavity.csv"),
        ("buckets", pair(&["--direction", "at-least", "--buckets", "20"]), "buckets.csv"),
        (
            "percentiles",
            vec![
                "--small".into(), s0.clone(), "--runs".into(), l0.clone(), "--runs".into(), l1.clone(),
                "--buckets".into(), "10".into(),
            ],
            "percentiles.csv",
        ),
        (
            "churn-table",
            vec!["--runs".into(), s0.clone(), "--runs".into(), s1.clone(), "--runs".into(), s2.clone()],
            "churn.csv",
        ),
        (
            "pairs",
            vec![
                "--small".into(), s0.clone(), "--small".into(), s1.clone(), "--large".into(), l0.clone(),
                "--large".into(), l1.clone(), "--kind".into(), "churn".into(),
            ],
            "pairs.csv",
        ),
        ("histogram", pair(&["--subset", "small-wrong"]), "histogram.csv"),
        ("calibrate", vec!["--small".into(), s0.clone(), "--fraction".into(), "0.2".into()], "policy.json"),
        ("synth", vec!["--seed".into(), "3".into()], "synth-out"),
    ];
    cases
        .into_iter()
        .map(|(name, mut args, file)| {
            let target = out.join(file);
            args.insert(0, name.to_string());
            args.push("--out".into());
            args.push(target.display().to_string());
            (name, args, target)
        })
        .collect()
}

/// Contents of a file, or of every file in a directory in name order.
pub fn snapshot(path: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    if path.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(path).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        names
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect()
    } else {
        vec![(String::new(), std::fs::read(path).unwrap())]
    }
}

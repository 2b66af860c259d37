//! Live deferral router.
//!
//! Every request goes to the small backend; the request is forwarded to the
//! large backend when the small output's uncertainty reaches the policy
//! threshold. If the large backend fails the small prediction is served
//! with `degraded: true`.

mod backend;
mod config;
mod metrics;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cascade_core::calibration::RoutingPolicy;
use cascade_core::routing::{decide, BackendOutput};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::task::JoinSet;

pub use backend::{BackendClient, BackendError, BackendRequest, BackendResponse};
pub use config::{BackendRole, BackendSpec, ServiceConfig, ServiceConfigFile};
pub use metrics::{LatencySnapshot, Metrics, MetricsSnapshot, LATENCY_BUCKETS_MS};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictRequest {
    #[serde(default)]
    pub example_id: Option<String>,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub prediction: String,
    /// `None` only when a committee kind could not be scored.
    pub uncertainty: Option<f64>,
    pub deferred: bool,
    pub served_by: String,
    pub degraded: bool,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error_response(status: StatusCode, message: String) -> Response {
    (status, Json(ErrorBody { error: message })).into_response()
}

struct Inner {
    policy: RoutingPolicy,
    small: BackendClient,
    large: BackendClient,
    committee: Vec<BackendClient>,
    metrics: Metrics,
}

/// Shared, read-only routing state plus the metrics counters.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: &ServiceConfig) -> Self {
        let http = reqwest::Client::new();
        let client = |spec: &BackendSpec| BackendClient::new(spec.clone(), http.clone());
        let names = std::iter::once(config.small.name.as_str())
            .chain(std::iter::once(config.large.name.as_str()))
            .chain(config.committee.iter().map(|b| b.name.as_str()));
        Self(Arc::new(Inner {
            policy: config.policy.clone(),
            small: client(&config.small),
            large: client(&config.large),
            committee: config.committee.iter().map(client).collect(),
            metrics: Metrics::new(names),
        }))
    }

    pub fn metrics_snapshot(&self) -> MetricsSnapshot {
        self.0.metrics.snapshot()
    }

    /// Queries every committee member concurrently; failed members are
    /// dropped. Results keep configuration order.
    async fn committee_outputs(&self, input: &str) -> Vec<BackendOutput> {
        let mut set = JoinSet::new();
        for (i, member) in self.0.committee.iter().cloned().enumerate() {
            let input = input.to_string();
            set.spawn(async move { (i, member.name().to_string(), member.predict(&input).await) });
        }
        let mut outputs = Vec::with_capacity(self.0.committee.len());
        while let Some(joined) = set.join_next().await {
            let Ok((i, name, (result, elapsed))) = joined else { continue };
            self.0.metrics.observe_latency(&name, elapsed);
            match result {
                Ok(out) => outputs.push((i, out)),
                Err(e) => tracing::warn!("{e}"),
            }
        }
        outputs.sort_by_key(|(i, _)| *i);
        outputs.into_iter().map(|(_, o)| o).collect()
    }

    pub async fn handle_predict(&self, request: PredictRequest) -> Result<PredictResponse, (StatusCode, String)> {
        let inner = &self.0;
        let (small, elapsed) = inner.small.predict(&request.input).await;
        inner.metrics.observe_latency(inner.small.name(), elapsed);
        let small = match small {
            Ok(out) => out,
            Err(e) => {
                inner.metrics.record_failure();
                tracing::error!("{e}");
                return Err((StatusCode::BAD_GATEWAY, e.to_string()));
            }
        };

        let committee = if inner.policy.kind.needs_committee() {
            Some(self.committee_outputs(&request.input).await)
        } else {
            None
        };
        let decision = match decide(&inner.policy, &small, committee.as_deref()) {
            Ok(d) => d,
            Err(e) => {
                // Scoring failed: keep serving the small prediction.
                tracing::warn!("cannot score request: {e}");
                inner.metrics.record_request(false, true);
                return Ok(PredictResponse {
                    prediction: small.prediction,
                    uncertainty: None,
                    deferred: false,
                    served_by: inner.small.name().to_string(),
                    degraded: true,
                });
            }
        };

        let mut response = PredictResponse {
            prediction: small.prediction,
            uncertainty: Some(decision.uncertainty),
            deferred: decision.deferred,
            served_by: inner.small.name().to_string(),
            degraded: false,
        };
        if decision.deferred {
            let (large, elapsed) = inner.large.predict(&request.input).await;
            inner.metrics.observe_latency(inner.large.name(), elapsed);
            match large {
                Ok(out) => {
                    response.prediction = out.prediction;
                    response.served_by = inner.large.name().to_string();
                }
                Err(e) => {
                    tracing::warn!("serving small prediction: {e}");
                    response.degraded = true;
                }
            }
        }
        tracing::debug!(
            example_id = request.example_id.as_deref().unwrap_or(""),
            uncertainty = decision.uncertainty,
            deferred = response.deferred,
            served_by = %response.served_by,
            "routed"
        );
        inner.metrics.record_request(response.deferred, response.degraded);
        Ok(response)
    }
}

async fn predict(State(state): State<AppState>, Json(request): Json<PredictRequest>) -> Response {
    match state.handle_predict(request).await {
        Ok(resp) => Json(resp).into_response(),
        Err((status, message)) => error_response(status, message),
    }
}

async fn metrics(State(state): State<AppState>) -> Json<MetricsSnapshot> {
    Json(state.metrics_snapshot())
}

async fn healthz(State(state): State<AppState>) -> Response {
    if state.0.small.reachable().await {
        (StatusCode::OK, "ok").into_response()
    } else {
        error_response(StatusCode::SERVICE_UNAVAILABLE, "small backend unreachable".into())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/metrics", get(metrics))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Binds `config.listen` and serves until `shutdown` resolves.
pub async fn serve(
    config: &ServiceConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = TcpListener::bind(&config.listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Serves on an already-bound listener in the background.
pub fn spawn(listener: TcpListener, state: AppState) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(state)).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok((addr, handle))
}

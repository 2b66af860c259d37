//! HTTP client for model backends.
//!
//! Contract: `POST {base}/predict` with `{"input": str}` answers either
//! `{"prediction", "probs", "labels"}`, `{"prediction", "tokens"}` or, for
//! committee members used only for churn, `{"prediction"}`.

use std::time::{Duration, Instant};

use cascade_core::model::{ClassDistribution, ModelOutput, TokenDistribution};
use cascade_core::routing::BackendOutput;
use serde::{Deserialize, Serialize};

use super::config::BackendSpec;
use crate::log::TokenLine;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendRequest {
    pub input: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendResponse {
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLine>>,
}

impl BackendResponse {
    pub fn into_output(self) -> Result<BackendOutput, String> {
        let output = match (self.probs, self.tokens) {
            (Some(probs), None) => {
                let dist = match self.labels {
                    Some(labels) => ClassDistribution::with_labels(probs, labels),
                    None => ClassDistribution::new(probs),
                }
                .map_err(|e| e.to_string())?;
                Some(ModelOutput::Class(dist))
            }
            (None, Some(tokens)) => Some(ModelOutput::Tokens(
                tokens
                    .into_iter()
                    .map(|t| TokenDistribution::new(t.top))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.to_string())?,
            )),
            (None, None) => None,
            (Some(_), Some(_)) => return Err("response carries both probs and tokens".into()),
        };
        Ok(BackendOutput { prediction: self.prediction, output })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend {name} unreachable: {source}")]
    Transport {
        name: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("backend {name} returned HTTP {status}")]
    Status { name: String, status: u16 },
    #[error("backend {name} sent an invalid response: {message}")]
    Invalid { name: String, message: String },
}

#[derive(Debug, Clone)]
pub struct BackendClient {
    pub spec: BackendSpec,
    http: reqwest::Client,
}

impl BackendClient {
    pub fn new(spec: BackendSpec, http: reqwest::Client) -> Self {
        Self { spec, http }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.spec.url.trim_end_matches('/'), path)
    }

    /// Calls the backend once; returns the output and the call latency.
    pub async fn predict(&self, input: &str) -> (Result<BackendOutput, BackendError>, Duration) {
        let started = Instant::now();
        let result = self.predict_inner(input).await;
        (result, started.elapsed())
    }

    async fn predict_inner(&self, input: &str) -> Result<BackendOutput, BackendError> {
        let name = || self.spec.name.clone();
        let resp = self
            .http
            .post(self.endpoint("predict"))
            .timeout(Duration::from_millis(self.spec.timeout))
            .json(&BackendRequest { input: input.to_string() })
            .send()
            .await
            .map_err(|source| BackendError::Transport { name: name(), source })?;
        if !resp.status().is_success() {
            return Err(BackendError::Status { name: name(), status: resp.status().as_u16() });
        }
        let body: BackendResponse = resp
            .json()
            .await
            .map_err(|e| BackendError::Invalid { name: name(), message: e.to_string() })?;
        body.into_output()
            .map_err(|message| BackendError::Invalid { name: name(), message })
    }

    /// Whether the backend answers HTTP at all.
    pub async fn reachable(&self) -> bool {
        self.http
            .get(self.endpoint("healthz"))
            .timeout(Duration::from_millis(self.spec.timeout))
            .send()
            .await
            .is_ok()
    }
}

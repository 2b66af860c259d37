//! Policy files: `{"kind", "threshold", "expected_deferral_fraction", "provenance"}`.

use std::fs;
use std::path::Path;

use cascade_core::calibration::RoutingPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub kind: String,
    pub threshold: f64,
    pub expected_deferral_fraction: f64,
    pub provenance: String,
}

impl From<&RoutingPolicy> for PolicyFile {
    fn from(p: &RoutingPolicy) -> Self {
        Self {
            kind: p.kind.as_str().to_string(),
            threshold: p.threshold,
            expected_deferral_fraction: p.expected_deferral_fraction,
            provenance: p.provenance.clone(),
        }
    }
}

impl TryFrom<PolicyFile> for RoutingPolicy {
    type Error = cascade_core::Error;

    fn try_from(f: PolicyFile) -> std::result::Result<Self, Self::Error> {
        RoutingPolicy::new(f.kind.parse()?, f.threshold, f.expected_deferral_fraction, f.provenance)
    }
}

pub fn load_policy(path: &Path) -> Result<RoutingPolicy> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PolicyFile =
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    RoutingPolicy::try_from(file).map_err(|e| Error::invalid(path, e.to_string()))
}

pub fn save_policy(policy: &RoutingPolicy, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&PolicyFile::from(policy))
        .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

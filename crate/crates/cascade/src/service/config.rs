use std::fs;
use std::path::Path;

use cascade_core::calibration::RoutingPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendRole {
    Small,
    Large,
    CommitteeMember,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub name: String,
    /// Base HTTP address, e.g. `http://127.0.0.1:9001`.
    pub url: String,
    /// Per-call timeout in milliseconds.
    pub timeout: u64,
    pub role: BackendRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfigFile {
    pub policy: PolicyFile,
    pub backends: Vec<BackendSpec>,
    pub listen: String,
}

/// Validated service configuration.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub policy: RoutingPolicy,
    pub small: BackendSpec,
    pub large: BackendSpec,
    pub committee: Vec<BackendSpec>,
    pub listen: String,
}

impl ServiceConfig {
    pub fn from_file(file: ServiceConfigFile) -> std::result::Result<Self, String> {
        let policy = RoutingPolicy::try_from(file.policy).map_err(|e| e.to_string())?;
        let mut small = Vec::new();
        let mut large = Vec::new();
        let mut committee = Vec::new();
        let mut names = std::collections::HashSet::new();
        for b in file.backends {
            if !names.insert(b.name.clone()) {
                return Err(format!("duplicate backend name {:?}", b.name));
            }
            match b.role {
                BackendRole::Small => small.push(b),
                BackendRole::Large => large.push(b),
                BackendRole::CommitteeMember => committee.push(b),
            }
        }
        if small.len() != 1 || large.len() != 1 {
            return Err(format!(
                "need exactly one small and one large backend, got {} small and {} large",
                small.len(),
                large.len()
            ));
        }
        let need = policy.kind.min_committee();
        if committee.len() < need {
            return Err(format!(
                "{} policy needs ≥ {need} committee_member backends, got {}",
                policy.kind,
                committee.len()
            ));
        }
        Ok(Self {
            policy,
            small: small.remove(0),
            large: large.remove(0),
            committee,
            listen: file.listen,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ServiceConfigFile =
            serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        Self::from_file(file).map_err(|m| Error::invalid(path, m))
    }
}

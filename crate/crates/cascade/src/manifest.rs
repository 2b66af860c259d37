//! Run manifests: one file naming every log of a dataset split.

use std::fs;
use std::path::{Path, PathBuf};

use cascade_core::model::{AnswerMatch, ModelRun, SizeTag};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::{load_prediction_log, LoadOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: String,
    pub size_tag: String,
    pub run_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub split: String,
    pub runs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads every listed run; `base` is the manifest's directory.
    pub fn load_runs(&self, base: &Path, answer_match: AnswerMatch) -> Result<Vec<ModelRun>> {
        self.runs
            .iter()
            .map(|entry| {
                let path: PathBuf = base.join(&entry.path);
                let size_tag: SizeTag = entry
                    .size_tag
                    .parse()
                    .map_err(|e: cascade_core::Error| Error::invalid(&path, e.to_string()))?;
                let options = LoadOptions {
                    answer_match,
                    size_tag,
                    run_index: entry.run_index,
                    ..LoadOptions::default()
                };
                load_prediction_log(&path, &options)
            })
            .collect()
    }
}

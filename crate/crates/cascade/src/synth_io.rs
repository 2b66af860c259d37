//! Synthetic-data config files and on-disk emission.

use std::fs;
use std::path::Path;

use cascade_core::synth::{DifficultyMix, SynthConfig, SynthOutput};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::write_prediction_log;
use crate::manifest::{Manifest, ManifestEntry};

/// JSON form of [`SynthConfig`]; omitted fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfigFile {
    pub n_examples: usize,
    pub n_classes: usize,
    pub committee_size: usize,
    pub seed: u64,
    pub difficulty_exponent: f64,
    pub large_advantage: f64,
    pub advantage_quantile: f64,
    pub certain_regression: f64,
    pub regression_quantile: f64,
    pub member_noise: f64,
    pub shared_draw: f64,
}

impl Default for SynthConfigFile {
    fn default() -> Self {
        SynthConfig::default().into()
    }
}

impl From<SynthConfig> for SynthConfigFile {
    fn from(c: SynthConfig) -> Self {
        Self {
            n_examples: c.n_examples,
            n_classes: c.n_classes,
            committee_size: c.committee_size,
            seed: c.seed,
            difficulty_exponent: c.difficulty_mix.exponent,
            large_advantage: c.large_advantage,
            advantage_quantile: c.advantage_quantile,
            certain_regression: c.certain_regression,
            regression_quantile: c.regression_quantile,
            member_noise: c.member_noise,
            shared_draw: c.shared_draw,
        }
    }
}

impl From<SynthConfigFile> for SynthConfig {
    fn from(f: SynthConfigFile) -> Self {
        Self {
            n_examples: f.n_examples,
            n_classes: f.n_classes,
            committee_size: f.committee_size,
            seed: f.seed,
            difficulty_mix: DifficultyMix { exponent: f.difficulty_exponent },
            large_advantage: f.large_advantage,
            advantage_quantile: f.advantage_quantile,
            certain_regression: f.certain_regression,
            regression_quantile: f.regression_quantile,
            member_noise: f.member_noise,
            shared_draw: f.shared_draw,
        }
    }
}

pub fn load_synth_config(path: &Path) -> Result<SynthConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SynthConfigFile =
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    Ok(file.into())
}

/// Writes one log per run plus `manifest.json` into `dir`.
pub fn write_synth_output(output: &SynthOutput, dir: &Path, dataset: &str) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for run in output.small.runs().iter().chain(output.large.runs()) {
        let file = format!("{}.jsonl", run.model_id);
        write_prediction_log(run, &dir.join(&file))?;
        entries.push(ManifestEntry {
            path: file,
            size_tag: run.size_tag.as_str().to_string(),
            run_index: run.run_index,
        });
    }
    let manifest = Manifest {
        dataset: dataset.to_string(),
        split: "test".to_string(),
        runs: entries,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

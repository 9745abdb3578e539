//! Optional pipeline configuration file.
//!
//! Every section is optional; command-line flags override whatever the file
//! provides and built-in defaults fill the rest.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use speechweave_core::corpus::SyntheticCorpusConfig;
use speechweave_core::duration::{DurationModelConfig, DurationTrainingConfig};
use speechweave_core::schedule::RateModel;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub synthetic: Option<SyntheticCorpusConfig>,
    pub duration_model: Option<DurationModelConfig>,
    pub duration_training: Option<DurationTrainingConfig>,
    pub rates: Option<RateModel>,
    pub min_words: Option<usize>,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(path) => {
                let data = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&data)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacegen_core::metrics::CoverageThresholds;
use spacegen_core::select::Strategy;
use spacegen_core::CrystalFormat;

use crate::client::EndpointConfig;
use crate::generate::{SamplingParams, DEFAULT_MAX_ATTEMPTS};
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub max_attempts: usize,
    pub shots: usize,
    pub strategy: Strategy,
    pub samples_per_condition: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            shots: 0,
            strategy: Strategy::Condition,
            samples_per_condition: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub repetitions: usize,
    pub thresholds: CoverageThresholds,
    pub eps: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            repetitions: 1,
            thresholds: CoverageThresholds::default(),
            eps: spacegen_core::symmetry::DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub cif_dir: Option<PathBuf>,
    pub properties: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub conditions: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub predictor: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Settings shared by `preprocess`, `generate` and `evaluate`. Credentials
/// are never read from here; the endpoint names an environment variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub format: Option<CrystalFormat>,
    pub workers: Option<usize>,
    pub endpoint: Option<EndpointConfig>,
    pub sampling: SamplingParams,
    pub generation: GenerationSettings,
    pub evaluation: EvaluationSettings,
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}

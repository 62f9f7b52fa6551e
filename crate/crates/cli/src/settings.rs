//! Optional TOML configuration. Every key is optional; command-line flags
//! and `FP2MOL_*` environment variables take precedence over it.
//!
//! ```toml
//! jobs = 4
//!
//! [fingerprint]
//! radius = 2
//! width = 4096
//!
//! [train]
//! lr = 5e-4
//! batch = 128
//! epochs = 6
//! seed = 0
//! embed_dim = 128
//!
//! [decode]
//! threshold = 0.5
//! beam = 10
//! max_len = 160
//!
//! [evaluate]
//! k = [1, 10]
//! mces_penalty = 100.0
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub jobs: Option<usize>,
    #[serde(default)]
    pub fingerprint: FingerprintSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintSection {
    pub radius: Option<u32>,
    pub width: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub embed_dim: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub ff_dim: Option<usize>,
    pub max_onbits: Option<usize>,
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub threshold: Option<f64>,
    pub beam: Option<usize>,
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub k: Option<Vec<usize>>,
    pub mces_penalty: Option<f64>,
    pub node_budget: Option<u64>,
    pub time_budget: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

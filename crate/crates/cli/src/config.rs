//! Optional TOML config file mirroring the CLI's tunable fields.
//!
//! Precedence everywhere: command-line flags > environment variables > config
//! file > built-in defaults. Only the remote endpoint and API key have
//! environment variables (`ROBUSTEXPLAIN_ENDPOINT`, `ROBUSTEXPLAIN_API_KEY`).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use robustexplain_core::MetricWeights;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    pub weights: Option<MetricWeights>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub seed: Option<u64>,
    pub items: Option<usize>,
    pub users: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub generator: Option<String>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub protocol: Option<String>,
    pub users: Option<usize>,
    pub kinds: Option<Vec<String>>,
    pub levels: Option<Vec<u8>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config file {}: {e}", path.display()))
    }
}

/// First present value wins; the caller lists sources in precedence order.
pub fn pick<T>(sources: impl IntoIterator<Item = Option<T>>, default: T) -> T {
    sources.into_iter().flatten().next().unwrap_or(default)
}

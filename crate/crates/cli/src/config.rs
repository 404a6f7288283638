//! Run configuration, read from TOML. Every key is optional.
//!
//! ```toml
//! corpus = "corpus"
//! output = "out"
//! strategy = "incremental"
//! seed = 0
//! jobs = 4
//!
//! [backend]
//! kind = "http"                 # or mock:oracle, mock:nonalias, mock:hash
//! endpoint = "http://localhost:8000/v1"
//! model = "llama-3-8b-instruct"
//! api_key_env = "QA_API_KEY"
//! scoring = true
//! cache_dir = "cache"
//!
//! [chunking]
//! window = 4096
//! overlap = 1024
//! ```

use std::path::{Path, PathBuf};

use qattr_core::attribution::Strategy;
use qattr_core::chunking::ChunkConfig;
use qattr_core::corpus::{CorpusOptions, DEFAULT_HEADING_PATTERN};
use qattr_core::inference::DecodingParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub output: PathBuf,
    pub strategy: Strategy,
    pub seed: u64,
    pub jobs: usize,
    pub heading_pattern: String,
    pub templates_dir: Option<PathBuf>,
    pub backend: BackendConfig,
    pub chunking: ChunkingSettings,
    pub csg: CsgSettings,
    pub name_cloze: NameClozeSettings,
    pub mink: MinKSettings,
    pub contamination: ContaminationSettings,
    pub report: ReportSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::from("corpus"),
            output: PathBuf::from("out"),
            strategy: Strategy::Incremental,
            seed: 0,
            jobs: 4,
            heading_pattern: DEFAULT_HEADING_PATTERN.to_string(),
            templates_dir: None,
            backend: BackendConfig::default(),
            chunking: ChunkingSettings::default(),
            csg: CsgSettings::default(),
            name_cloze: NameClozeSettings::default(),
            mink: MinKSettings::default(),
            contamination: ContaminationSettings::default(),
            report: ReportSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: String,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub scoring: bool,
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub max_attempts: usize,
    pub timeout_secs: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub decoding_seed: Option<u64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let params = DecodingParams::default();
        BackendConfig {
            kind: "mock:hash".to_string(),
            endpoint: String::new(),
            model: String::new(),
            api_key_env: "QA_API_KEY".to_string(),
            scoring: false,
            cache_dir: None,
            max_in_flight: 4,
            max_attempts: 3,
            timeout_secs: 600,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            decoding_seed: params.seed,
        }
    }
}

impl BackendConfig {
    pub fn params(&self) -> DecodingParams {
        DecodingParams { temperature: self.temperature, max_tokens: self.max_tokens, seed: self.decoding_seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingSettings {
    pub window: usize,
    pub overlap: usize,
}

impl Default for ChunkingSettings {
    fn default() -> Self {
        let c = ChunkConfig::default();
        ChunkingSettings { window: c.window, overlap: c.overlap }
    }
}

impl ChunkingSettings {
    pub fn chunk_config(&self) -> ChunkConfig {
        ChunkConfig { window: self.window, overlap: self.overlap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsgSettings {
    pub n_per_type: usize,
}

impl Default for CsgSettings {
    fn default() -> Self {
        CsgSettings { n_per_type: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NameClozeSettings {
    pub n_samples: usize,
    pub window_words: usize,
}

impl Default for NameClozeSettings {
    fn default() -> Self {
        NameClozeSettings { n_samples: 100, window_words: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinKSettings {
    pub sample_frac: f64,
    pub k_values: Vec<f64>,
}

impl Default for MinKSettings {
    fn default() -> Self {
        MinKSettings { sample_frac: 0.2, k_values: vec![10.0, 20.0, 30.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContaminationSettings {
    /// Min-K% level used as the propensity covariate.
    pub mink_k: f64,
}

impl Default for ContaminationSettings {
    fn default() -> Self {
        ContaminationSettings { mink_k: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub top_k: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings { top_k: 5 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.chunking.window <= self.chunking.overlap || self.chunking.overlap == 0 {
            return bad(format!(
                "window ({}) must exceed overlap ({}), and overlap must be positive",
                self.chunking.window, self.chunking.overlap
            ));
        }
        if !(self.mink.sample_frac > 0.0 && self.mink.sample_frac <= 1.0) {
            return bad(format!("mink.sample_frac must lie in (0, 1], got {}", self.mink.sample_frac));
        }
        if self.mink.k_values.is_empty() || self.mink.k_values.iter().any(|k| !(*k > 0.0 && *k <= 100.0)) {
            return bad(format!("mink.k_values must be non-empty and within (0, 100], got {:?}", self.mink.k_values));
        }
        if !(self.contamination.mink_k > 0.0 && self.contamination.mink_k <= 100.0) {
            return bad(format!("contamination.mink_k must lie in (0, 100], got {}", self.contamination.mink_k));
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.report.top_k == 0 {
            return bad("report.top_k must be at least 1".into());
        }
        Ok(())
    }

    pub fn corpus_options(&self) -> CorpusOptions {
        CorpusOptions { heading_pattern: self.heading_pattern.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.chunking.chunk_config(), ChunkConfig { window: 4096, overlap: 1024 });
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn reads_nested_tables() {
        let cfg: RunConfig = toml::from_str(
            "strategy = \"first\"\n[backend]\nkind = \"http\"\nscoring = true\n[chunking]\nwindow = 500\n[mink]\nk_values = [5.0, 50.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.strategy, Strategy::First);
        assert_eq!(cfg.backend.kind, "http");
        assert_eq!((cfg.chunking.window, cfg.chunking.overlap), (500, 1024));
        assert_eq!(cfg.mink.k_values, vec![5.0, 50.0]);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<RunConfig>("windw = 3").is_err());
        let mut cfg = RunConfig::default();
        cfg.chunking.overlap = 4096;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.mink.sample_frac = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.mink.k_values = vec![120.0];
        assert!(cfg.validate().is_err());
    }
}

use qattr_core::corpus::Novel;
use qattr_core::inference::{Backend, CachedBackend, HttpBackend, HttpConfig, MockBackend};

use crate::config::BackendConfig;
use crate::error::CliError;

pub const BACKEND_KINDS: [&str; 4] = ["mock:oracle", "mock:nonalias", "mock:hash", "http"];

/// Builds the configured backend, wrapped in the disk cache when one is set.
/// The oracle mock answers from the gold labels of `novels`.
pub fn build_backend(cfg: &BackendConfig, novels: &[Novel]) -> Result<Box<dyn Backend>, CliError> {
    let inner: Box<dyn Backend> = match cfg.kind.as_str() {
        "mock:oracle" => Box::new(MockBackend::gold_oracle(&novels.iter().collect::<Vec<_>>())),
        "mock:nonalias" => Box::new(MockBackend::non_alias()),
        "mock:hash" => Box::new(MockBackend::hashing()),
        "http" => Box::new(HttpBackend::new(http_config(cfg)?)?),
        other => {
            return Err(CliError::Config(format!("unknown backend {other:?}; expected one of {}", BACKEND_KINDS.join(", "))))
        }
    };
    match &cfg.cache_dir {
        Some(dir) => Ok(Box::new(CachedBackend::new(inner, dir)?)),
        None => Ok(inner),
    }
}

fn http_config(cfg: &BackendConfig) -> Result<HttpConfig, CliError> {
    let mut http = HttpConfig {
        endpoint: cfg.endpoint.clone(),
        model: cfg.model.clone(),
        api_key: std::env::var(&cfg.api_key_env).ok(),
        scoring: cfg.scoring,
        max_attempts: cfg.max_attempts,
        timeout_secs: cfg.timeout_secs,
        max_in_flight: cfg.max_in_flight,
        ..HttpConfig::default()
    }
    .with_env();
    if http.api_key.as_deref() == Some("") {
        http.api_key = None;
    }
    if http.endpoint.is_empty() || http.model.is_empty() {
        return Err(CliError::Config(
            "http backend needs an endpoint and a model (config keys backend.endpoint/backend.model or QA_ENDPOINT/QA_MODEL)"
                .into(),
        ));
    }
    Ok(http)
}

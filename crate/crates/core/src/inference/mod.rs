//! Model access: a `Backend` trait over chat completion and token scoring,
//! with an OpenAI-compatible HTTP client, a deterministic mock, an on-disk
//! response cache, and parsers for the structured answers we ask for.

mod cache;
mod http;
mod mock;
mod parse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedBackend;
pub use http::{HttpBackend, HttpConfig};
pub use mock::{hash_scores, marked_quote_texts, mock_tokenize, MockBackend};
pub use parse::{parse_attribution_json, parse_speaker_tag, AttributionParse};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("request failed after {attempts} attempt(s): {detail}")]
    Transport { attempts: usize, detail: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("empty response from {model}")]
    EmptyResponse { model: String },
    #[error("unexpected response shape: {0}")]
    Decode(String),
    #[error("backend {model} does not support token scoring")]
    ScoringUnsupported { model: String },
    #[error("no scripted response for prompt")]
    Unscripted,
    #[error("cache {path}: {detail}")]
    Cache { path: String, detail: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams { temperature: 0.0, max_tokens: 1024, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub logprob: f64,
}

pub trait Backend: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError>;

    fn supports_scoring(&self) -> bool;

    /// Per-token log-probabilities of `text` under the model, in order.
    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError>;

    /// Fails up front when token scoring is unavailable.
    fn require_scoring(&self) -> Result<(), InferenceError> {
        if self.supports_scoring() {
            Ok(())
        } else {
            Err(InferenceError::ScoringUnsupported { model: self.model_id().to_string() })
        }
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError> {
        (**self).complete(prompt, params)
    }
    fn supports_scoring(&self) -> bool {
        (**self).supports_scoring()
    }
    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError> {
        (**self).score(text)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError> {
        (**self).complete(prompt, params)
    }
    fn supports_scoring(&self) -> bool {
        (**self).supports_scoring()
    }
    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError> {
        (**self).score(text)
    }
}

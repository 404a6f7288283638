use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, DecodingParams, InferenceError, TokenScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    /// Whether the server answers `/completions` with `echo` + `logprobs`.
    pub scoring: bool,
    pub max_attempts: usize,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            scoring: false,
            max_attempts: 3,
            backoff_ms: 500,
            timeout_secs: 600,
            max_in_flight: 4,
        }
    }
}

impl HttpConfig {
    /// Fills endpoint, model and key from `QA_ENDPOINT`, `QA_MODEL` and
    /// `QA_API_KEY` when set.
    pub fn with_env(mut self) -> HttpConfig {
        if let Ok(v) = std::env::var("QA_ENDPOINT") {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var("QA_MODEL") {
            self.model = v;
        }
        if let Ok(v) = std::env::var("QA_API_KEY") {
            self.api_key = Some(v);
        }
        self
    }
}

struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.count.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|p| p.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for an OpenAI-compatible server.
pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    in_flight: InFlight,
}

enum Failure {
    Retry(String),
    Fatal(InferenceError),
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<HttpBackend, InferenceError> {
        if cfg.endpoint.trim().is_empty() {
            return Err(InferenceError::Config("no endpoint configured (set QA_ENDPOINT)".into()));
        }
        if cfg.model.trim().is_empty() {
            return Err(InferenceError::Config("no model configured (set QA_MODEL)".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| InferenceError::Config(e.to_string()))?;
        let limit = cfg.max_in_flight.max(1);
        Ok(HttpBackend { cfg, client, in_flight: InFlight { count: Mutex::new(0), freed: Condvar::new(), limit } })
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{route}", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn post(&self, route: &str, body: &Value) -> Result<Value, InferenceError> {
        let _permit = self.in_flight.acquire();
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post_once(route, body) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(detail)) => {
                    log::warn!("{route} attempt {attempt}/{attempts} failed: {detail}");
                    last = detail;
                    if attempt < attempts {
                        std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
                    }
                }
            }
        }
        Err(InferenceError::Transport { attempts, detail: last })
    }

    fn post_once(&self, route: &str, body: &Value) -> Result<Value, Failure> {
        let mut req = self.client.post(self.url(route)).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retry(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retry(format!("HTTP {status}: {}", truncate(&text))));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(InferenceError::Status { status: status.as_u16(), body: truncate(&text) }));
        }
        serde_json::from_str(&text).map_err(|e| Failure::Fatal(InferenceError::Decode(e.to_string())))
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

impl Backend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError> {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let v = self.post("chat/completions", &body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| InferenceError::Decode("missing choices[0].message.content".into()))?;
        if text.trim().is_empty() {
            return Err(InferenceError::EmptyResponse { model: self.cfg.model.clone() });
        }
        Ok(text.to_string())
    }

    fn supports_scoring(&self) -> bool {
        self.cfg.scoring
    }

    /// Prompt log-probabilities via `/completions` with `echo`. The first
    /// token has no conditional probability and is omitted.
    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError> {
        self.require_scoring()?;
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({
            "model": self.cfg.model,
            "prompt": text,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 1,
            "temperature": 0.0,
        });
        let v = self.post("completions", &body)?;
        let lp = v.pointer("/choices/0/logprobs").ok_or_else(|| InferenceError::Decode("missing choices[0].logprobs".into()))?;
        let tokens = lp.get("tokens").and_then(Value::as_array);
        let values = lp.get("token_logprobs").and_then(Value::as_array);
        let (Some(tokens), Some(values)) = (tokens, values) else {
            return Err(InferenceError::Decode("logprobs lacks tokens/token_logprobs".into()));
        };
        if tokens.len() != values.len() {
            return Err(InferenceError::Decode("tokens and token_logprobs differ in length".into()));
        }
        let mut out = Vec::with_capacity(tokens.len());
        for (t, v) in tokens.iter().zip(values) {
            let Some(logprob) = v.as_f64() else { continue };
            if !logprob.is_finite() {
                return Err(InferenceError::Decode(format!("non-finite logprob {logprob}")));
            }
            out.push(TokenScore { token: t.as_str().unwrap_or_default().to_string(), logprob: logprob.min(0.0) });
        }
        Ok(out)
    }
}

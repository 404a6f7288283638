use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, DecodingParams, InferenceError, TokenScore};

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    model: String,
    kind: String,
    prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<DecodingParams>,
    response: T,
}

/// Wraps a backend with an on-disk response store keyed by
/// SHA-256 of (model id, request kind, prompt, decoding params).
pub struct CachedBackend<B> {
    inner: B,
    dir: PathBuf,
    write_lock: Mutex<()>,
    hits: AtomicUsize,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<CachedBackend<B>, InferenceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(CachedBackend { inner, dir, write_lock: Mutex::new(()), hits: AtomicUsize::new(0) })
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    fn key(&self, kind: &str, prompt: &str, params: Option<&DecodingParams>) -> String {
        let mut h = Sha256::new();
        for part in [self.inner.model_id(), kind, prompt] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        if let Some(p) = params {
            h.update(serde_json::to_vec(p).expect("params serialize"));
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn lookup<T: for<'de> Deserialize<'de>>(&self, key: &str, kind: &str, prompt: &str) -> Option<T> {
        let path = self.path(key);
        let raw = fs::read(&path).ok()?;
        match serde_json::from_slice::<Entry<T>>(&raw) {
            Ok(e) if e.prompt == prompt && e.kind == kind && e.model == self.inner.model_id() => Some(e.response),
            Ok(_) => {
                log::warn!("cache entry {} does not match its request; ignoring", path.display());
                None
            }
            Err(err) => {
                log::warn!("unreadable cache entry {}: {err}", path.display());
                None
            }
        }
    }

    fn store<T: Serialize>(&self, key: &str, entry: &Entry<T>) -> Result<(), InferenceError> {
        let path = self.path(key);
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent).map_err(|e| cache_err(parent, e))?;
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        fs::write(&tmp, body).map_err(|e| cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_err(&path, e))
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> InferenceError {
    InferenceError::Cache { path: path.display().to_string(), detail: e.to_string() }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError> {
        let key = self.key("complete", prompt, Some(params));
        if let Some(hit) = self.lookup::<String>(&key, "complete", prompt) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        let response = self.inner.complete(prompt, params)?;
        self.store(
            &key,
            &Entry {
                model: self.inner.model_id().to_string(),
                kind: "complete".into(),
                prompt: prompt.to_string(),
                params: Some(params.clone()),
                response: response.clone(),
            },
        )?;
        Ok(response)
    }

    fn supports_scoring(&self) -> bool {
        self.inner.supports_scoring()
    }

    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError> {
        self.inner.require_scoring()?;
        let key = self.key("score", text, None);
        if let Some(hit) = self.lookup::<Vec<TokenScore>>(&key, "score", text) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        let scores = self.inner.score(text)?;
        self.store(
            &key,
            &Entry {
                model: self.inner.model_id().to_string(),
                kind: "score".into(),
                prompt: text.to_string(),
                params: None,
                response: scores.clone(),
            },
        )?;
        Ok(scores)
    }
}

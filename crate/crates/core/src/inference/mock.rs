use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::{Backend, DecodingParams, InferenceError, TokenScore};
use crate::corpus::Novel;

type Responder = Box<dyn Fn(&str, &DecodingParams) -> Result<String, InferenceError> + Send + Sync>;
type Scorer = Box<dyn Fn(&str) -> Vec<TokenScore> + Send + Sync>;

/// In-process backend whose answers are a pure function of the prompt.
pub struct MockBackend {
    model: String,
    respond: Responder,
    scorer: Option<Scorer>,
    calls: AtomicUsize,
}

impl std::fmt::Debug for MockBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockBackend").field("model", &self.model).finish_non_exhaustive()
    }
}

fn digest(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().into()
}

/// Whitespace tokenizer used by the mock scorer.
pub fn mock_tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Deterministic pseudo log-probabilities in `[-10, -0.01]`, one per token.
pub fn hash_scores(text: &str) -> Vec<TokenScore> {
    mock_tokenize(text)
        .into_iter()
        .map(|tok| {
            let d = digest(&[tok]);
            let v = u16::from_le_bytes([d[0], d[1]]) as f64 / u16::MAX as f64;
            TokenScore { token: tok.to_string(), logprob: -(0.01 + v * 9.99) }
        })
        .collect()
}

/// Text of the first marked region for each local id in a `|i|...|i|`
/// passage, with surrounding quote marks and whitespace removed.
pub fn marked_quote_texts(prompt: &str) -> BTreeMap<usize, String> {
    let b = prompt.as_bytes();
    let mut out = BTreeMap::new();
    let mut open: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'|' {
            let mut j = i + 1;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && j < b.len() && b[j] == b'|' {
                let id: usize = prompt[i + 1..j].parse().unwrap_or(usize::MAX);
                match open {
                    Some((cur, start)) if cur == id => {
                        out.entry(id).or_insert_with(|| strip_quote_marks(&prompt[start..i]).to_string());
                        open = None;
                    }
                    _ => open = Some((id, j + 1)),
                }
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn strip_quote_marks(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\u{201C}' | '\u{201D}' | '\''))
}

fn json_answer(pairs: &BTreeMap<usize, String>) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("'{k}': '{}'", v.replace('\'', "\\'"))).collect();
    format!("{{ {} }}", body.join(", "))
}

impl MockBackend {
    pub fn from_fn<F>(model: &str, f: F) -> MockBackend
    where
        F: Fn(&str, &DecodingParams) -> Result<String, InferenceError> + Send + Sync + 'static,
    {
        MockBackend { model: model.to_string(), respond: Box::new(f), scorer: None, calls: AtomicUsize::new(0) }
    }

    /// Answers from a fixed prompt → response table.
    pub fn from_map(map: HashMap<String, String>) -> MockBackend {
        MockBackend::from_fn("mock-map", move |p, _| map.get(p).cloned().ok_or(InferenceError::Unscripted))
    }

    pub fn constant(answer: &str) -> MockBackend {
        let answer = answer.to_string();
        MockBackend::from_fn("mock-constant", move |_, _| Ok(answer.clone()))
    }

    /// Attributes every marked quote to its gold speaker, looked up by quote
    /// text across `novels`. Prompts without markers get `{}`.
    pub fn gold_oracle(novels: &[&Novel]) -> MockBackend {
        let mut gold: HashMap<String, String> = HashMap::new();
        for novel in novels {
            for q in &novel.quotes {
                for sub in &q.sub_quotations {
                    gold.insert(strip_quote_marks(sub).to_string(), q.speaker.clone());
                }
            }
        }
        MockBackend::from_fn("mock-oracle", move |prompt, _| {
            let answers = marked_quote_texts(prompt)
                .into_iter()
                .filter_map(|(id, text)| gold.get(&text).map(|s| (id, s.clone())))
                .collect();
            Ok(json_answer(&answers))
        })
    }

    /// Answers "Gandalf" for every marked quote and every speaker question.
    pub fn non_alias() -> MockBackend {
        MockBackend::from_fn("mock-nonalias", |prompt, _| {
            let ids = marked_quote_texts(prompt);
            if ids.is_empty() {
                Ok("<speaker>Gandalf</speaker>".to_string())
            } else {
                Ok(json_answer(&ids.into_keys().map(|id| (id, "Gandalf".to_string())).collect()))
            }
        })
    }

    /// Picks answers by hashing the prompt: names come from the prompt's own
    /// alias block (attribution) or its capitalized words (speaker
    /// questions). Token scoring uses [`hash_scores`].
    pub fn hashing() -> MockBackend {
        MockBackend::from_fn("mock-hash", |prompt, _| {
            let ids = marked_quote_texts(prompt);
            if !ids.is_empty() {
                let names = alias_block_names(prompt);
                let answers = ids
                    .into_keys()
                    .map(|id| {
                        let d = digest(&[prompt, &id.to_string()]);
                        let name =
                            if names.is_empty() { "Nobody".to_string() } else { names[d[0] as usize % names.len()].clone() };
                        (id, name)
                    })
                    .collect();
                return Ok(json_answer(&answers));
            }
            let words: Vec<&str> = prompt
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| w.len() > 2 && w.chars().next().is_some_and(char::is_uppercase))
                .collect();
            let d = digest(&[prompt]);
            let pick = if words.is_empty() { "Nobody" } else { words[d[0] as usize % words.len()] };
            Ok(format!("<speaker>{pick}</speaker>"))
        })
        .with_scorer(hash_scores)
    }

    pub fn with_scorer<F>(mut self, f: F) -> MockBackend
    where
        F: Fn(&str) -> Vec<TokenScore> + Send + Sync + 'static,
    {
        self.scorer = Some(Box::new(f));
        self
    }

    pub fn with_model_id(mut self, model: &str) -> MockBackend {
        self.model = model.to_string();
        self
    }

    /// Number of `complete` and `score` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Canonical names from the last `---`-fenced block, where attribution
/// prompts put the alias list.
fn alias_block_names(prompt: &str) -> Vec<String> {
    let lines: Vec<&str> = prompt.lines().collect();
    let fences: Vec<usize> = lines.iter().enumerate().filter(|(_, l)| l.trim() == "---").map(|(i, _)| i).collect();
    let [.., open, close] = fences[..] else { return Vec::new() };
    lines[open + 1..close]
        .iter()
        .filter_map(|l| l.split('=').next())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl Backend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, InferenceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let out = (self.respond)(prompt, params)?;
        if out.is_empty() {
            return Err(InferenceError::EmptyResponse { model: self.model.clone() });
        }
        Ok(out)
    }

    fn supports_scoring(&self) -> bool {
        self.scorer.is_some()
    }

    fn score(&self, text: &str) -> Result<Vec<TokenScore>, InferenceError> {
        let scorer = self.scorer.as_ref().ok_or_else(|| InferenceError::ScoringUnsupported { model: self.model.clone() })?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(scorer(text))
    }
}

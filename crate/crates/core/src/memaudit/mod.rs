//! Memorization and contamination probes: corrupted speaker guessing,
//! name cloze and Min-K%.

pub mod csg;
pub mod mink;
pub mod namecloze;
pub mod names;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::inference::InferenceError;
use crate::prompting::PromptError;

pub use csg::{build_csg_item, classify_csg, run_csg, CsgConfig, CsgItem, CsgOutcome, CsgResult, CsgRun, CsgVariant};
pub use mink::{min_k_mean, run_min_k, MinKConfig, MinKResult};
pub use namecloze::{run_name_cloze, NameClozeConfig, NameClozeResult, NameClozeRun};
pub use names::NameConfig;

#[derive(Debug, Error)]
pub enum MemauditError {
    #[error("{novel}: no quotes or mentions eligible for {probe}")]
    NoEligible { novel: String, probe: &'static str },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{0}")]
    Config(String),
}

/// Sub-seed for one sampling stream, stable across platforms.
pub(crate) fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in path {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

//! Name cloze: mask one character name in a short passage and ask for it,
//! without telling the model which book the passage comes from.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::names::find_mentions;
use super::{derive_seed, MemauditError};
use crate::corpus::Novel;
use crate::inference::{parse_speaker_tag, Backend, DecodingParams};
use crate::prompting::{PromptTemplates, MASK};

#[derive(Debug, Clone)]
pub struct NameClozeConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Passage length in words, centred on the masked name.
    pub window_words: usize,
    pub params: DecodingParams,
}

impl Default for NameClozeConfig {
    fn default() -> Self {
        NameClozeConfig { n_samples: 100, seed: 0, window_words: 50, params: DecodingParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameClozeItem {
    /// Byte offset of the masked name in the novel text.
    pub offset: usize,
    pub character: String,
    pub masked_name: String,
    pub passage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameClozeAnswer {
    pub item: NameClozeItem,
    pub predicted: Option<String>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameClozeResult {
    pub novel_id: String,
    pub eligible: usize,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameClozeRun {
    pub result: NameClozeResult,
    pub answers: Vec<NameClozeAnswer>,
}

/// Every mention whose surrounding window holds no other mention of the
/// same character, as a masked passage.
pub fn name_cloze_items(novel: &Novel, window_words: usize) -> Vec<NameClozeItem> {
    let words: Vec<(usize, usize)> =
        Regex::new(r"\S+").expect("static regex").find_iter(&novel.text).map(|m| (m.start(), m.end())).collect();
    let mentions = find_mentions(&novel.text, &novel.characters);
    let half = window_words / 2;
    let mut items = Vec::new();
    for m in &mentions {
        let first = words.partition_point(|w| w.1 <= m.range.start);
        let last = words.partition_point(|w| w.0 < m.range.end).saturating_sub(1).max(first);
        let lo = first.saturating_sub(half);
        let hi = (last + window_words.saturating_sub(half).max(1)).min(words.len());
        let (start, end) = (words[lo].0.min(m.range.start), words[hi - 1].1.max(m.range.end));
        let crowded = mentions
            .iter()
            .any(|o| o.character == m.character && o.range != m.range && o.range.start < end && start < o.range.end);
        if crowded {
            continue;
        }
        let passage = format!("{}{MASK}{}", &novel.text[start..m.range.start], &novel.text[m.range.end..end]);
        items.push(NameClozeItem {
            offset: m.range.start,
            character: m.character.clone(),
            masked_name: m.alias.clone(),
            passage,
        });
    }
    items
}

pub fn run_name_cloze(
    novel: &Novel,
    backend: &dyn Backend,
    templates: &PromptTemplates,
    cfg: &NameClozeConfig,
) -> Result<NameClozeRun, MemauditError> {
    let mut items = name_cloze_items(novel, cfg.window_words);
    if items.is_empty() {
        return Err(MemauditError::NoEligible { novel: novel.id.clone(), probe: "name cloze" });
    }
    let eligible = items.len();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x6e63])));
    items.truncate(cfg.n_samples);
    let answers: Vec<NameClozeAnswer> = items
        .into_par_iter()
        .map(|item| {
            let prompt = templates.name_cloze(&item.passage)?;
            let response = backend.complete(&prompt, &cfg.params)?;
            let predicted = parse_speaker_tag(&response);
            let correct = predicted.as_deref().and_then(|p| novel.characters.resolve(p)).is_some_and(|id| id == item.character);
            Ok(NameClozeAnswer { item, predicted, correct })
        })
        .collect::<Result<_, MemauditError>>()?;
    let correct = answers.iter().filter(|a| a.correct).count();
    let n = answers.len();
    Ok(NameClozeRun {
        result: NameClozeResult { novel_id: novel.id.clone(), eligible, n, correct, accuracy: correct as f64 / n as f64 },
        answers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::MockBackend;
    use crate::synth::{generate, SynthSpec};
    use std::collections::HashMap;

    fn novel() -> Novel {
        generate("nc", &SynthSpec::default()).novel().unwrap()
    }

    #[test]
    fn items_have_one_mask_and_no_same_character_mention() {
        let n = novel();
        let items = name_cloze_items(&n, 50);
        assert!(!items.is_empty());
        for it in &items {
            assert_eq!(it.passage.matches(MASK).count(), 1);
            let c = n.characters.get(&it.character).unwrap();
            let others = find_mentions(&it.passage, &n.characters);
            assert!(others.iter().all(|m| m.character != c.id), "{:?}", it.passage);
            let words = it.passage.split_whitespace().count();
            assert!(words <= 52, "{words} words");
        }
    }

    #[test]
    fn echo_oracle_scores_one_and_constant_scores_zero() {
        let n = novel();
        let items = name_cloze_items(&n, 50);
        let templates = PromptTemplates::default();
        let answers: HashMap<String, String> = items
            .iter()
            .map(|it| (templates.name_cloze(&it.passage).unwrap(), format!("<speaker>{}</speaker>", it.masked_name)))
            .collect();
        let cfg = NameClozeConfig { n_samples: 30, seed: 4, ..NameClozeConfig::default() };
        let run = run_name_cloze(&n, &MockBackend::from_map(answers), &templates, &cfg).unwrap();
        assert_eq!(run.result.n, 30.min(items.len()));
        assert_eq!(run.result.accuracy, 1.0);

        let run = run_name_cloze(&n, &MockBackend::constant("<speaker>X</speaker>"), &templates, &cfg).unwrap();
        assert_eq!(run.result.accuracy, 0.0);
    }

    #[test]
    fn seeded_sampling_is_stable() {
        let n = novel();
        let templates = PromptTemplates::default();
        let cfg = NameClozeConfig { n_samples: 10, seed: 9, ..NameClozeConfig::default() };
        let mock = MockBackend::hashing();
        let a = run_name_cloze(&n, &mock, &templates, &cfg).unwrap();
        let b = run_name_cloze(&n, &mock, &templates, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

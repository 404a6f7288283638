//! Corrupted speaker guessing: swap the speaker's names for a fresh name
//! in the surrounding passage, ask for the speaker, and see whether the
//! model answers with the original name (memorization) or the new one.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::names::{contains_alias, find_mentions, replacement_pool, NameConfig, Renamer, Replacement};
use super::{derive_seed, MemauditError};
use crate::corpus::{segment_sentences, Gender, Novel, Quote, QuoteType};
use crate::inference::{parse_speaker_tag, Backend, DecodingParams};
use crate::prompting::{CsgPromptInput, PromptTemplates, MASK};

pub const CONTEXT_SENTENCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsgVariant {
    /// Explicit quotes: the speaker's name in the referring expression is masked.
    Cloze,
    Speaker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsgItem {
    pub quote_id: String,
    pub quote_type: QuoteType,
    pub variant: CsgVariant,
    pub passage: String,
    pub corrupted_passage: String,
    pub target_quote: String,
    pub true_speaker: String,
    pub true_aliases: Vec<String>,
    /// First replacement form written into the passage.
    pub replacement_name: String,
    /// Every distinct replacement form written.
    pub replacement_forms: Vec<String>,
    pub replacement_first: String,
    pub replacement_gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referring_expression: Option<String>,
}

/// Why a quote cannot become an item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ineligible {
    UnknownGender,
    NoNamedMention,
    NoReferringMention,
    ResidualMention,
    PoolExhausted,
}

/// The passage around a quote: up to `CONTEXT_SENTENCES` sentences on
/// each side, within the quote's chapter. Returns the absolute byte range.
pub fn context_range(novel: &Novel, quote_index: usize) -> Range<usize> {
    let q = &novel.quotes[quote_index];
    let chapter = novel.chapters[novel.quote_chapters[quote_index]].range.clone();
    let text = &novel.text[chapter.clone()];
    let sentences = segment_sentences(text);
    let extent = q.extent(&novel.text);
    let (s, e) = (extent.start - chapter.start, extent.end - chapter.start);
    let first = sentences.partition_point(|r| r.end <= s);
    let last = sentences.partition_point(|r| r.end < e).min(sentences.len().saturating_sub(1));
    let lo = first.saturating_sub(CONTEXT_SENTENCES);
    let hi = (last + CONTEXT_SENTENCES).min(sentences.len() - 1);
    chapter.start + sentences[lo].start..chapter.start + sentences[hi].end
}

struct Rewrite {
    text: String,
    forms: Vec<String>,
    masked: usize,
}

/// Replaces the speaker's mentions in `text`; the mention starting at
/// `mask_at` (if any) becomes `[MASK]` instead.
fn rewrite(text: &str, novel: &Novel, speaker: &str, renamer: &Renamer<'_>, mask_at: Option<usize>) -> Rewrite {
    let mut out = String::with_capacity(text.len());
    let mut forms: Vec<String> = Vec::new();
    let mut masked = 0;
    let mut pos = 0;
    for m in find_mentions(text, &novel.characters).into_iter().filter(|m| m.character == speaker) {
        out.push_str(&text[pos..m.range.start]);
        if Some(m.range.start) == mask_at {
            out.push_str(MASK);
            masked += 1;
        } else {
            let form = renamer.rename(&m.alias);
            out.push_str(&form);
            if !forms.contains(&form) {
                forms.push(form);
            }
        }
        pos = m.range.end;
    }
    out.push_str(&text[pos..]);
    Rewrite { text: out, forms, masked }
}

/// Builds the probe item for one quote, or says why it is ineligible.
pub fn build_csg_item(novel: &Novel, quote_index: usize, names: &NameConfig, seed: u64) -> Result<CsgItem, Ineligible> {
    let q: &Quote = &novel.quotes[quote_index];
    let character = novel.characters.get(&q.speaker).expect("validated speaker");
    if character.gender == Gender::Unknown {
        return Err(Ineligible::UnknownGender);
    }
    let range = context_range(novel, quote_index);
    let passage = &novel.text[range.clone()];
    let mentions: Vec<_> = find_mentions(passage, &novel.characters).into_iter().filter(|m| m.character == q.speaker).collect();
    if mentions.is_empty() {
        return Err(Ineligible::NoNamedMention);
    }

    let pool = replacement_pool(character.gender, &novel.characters, names);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some((first, surname)) = pool.choose(&mut rng).cloned() else {
        return Err(Ineligible::PoolExhausted);
    };
    let renamer = Renamer::new(character, names, Replacement { first: first.clone(), surname, gender: character.gender });

    let variant = if q.quote_type == QuoteType::Explicit { CsgVariant::Cloze } else { CsgVariant::Speaker };
    let mask_at = match variant {
        CsgVariant::Cloze => {
            let referring = q.referring_expression.as_deref().ok_or(Ineligible::NoReferringMention)?;
            let extent = q.extent(&novel.text);
            let (qs, qe) = (extent.start - range.start, extent.end - range.start);
            let nearest = passage
                .match_indices(referring)
                .map(|(at, _)| at..at + referring.len())
                .min_by_key(|r| if r.start >= qe { r.start - qe } else { qs.saturating_sub(r.end) })
                .ok_or(Ineligible::NoReferringMention)?;
            let m = mentions
                .iter()
                .find(|m| nearest.start <= m.range.start && m.range.end <= nearest.end)
                .ok_or(Ineligible::NoReferringMention)?;
            Some(m.range.start)
        }
        CsgVariant::Speaker => None,
    };

    let corrupted = rewrite(passage, novel, &q.speaker, &renamer, mask_at);
    if corrupted.forms.is_empty() {
        return Err(Ineligible::NoNamedMention);
    }
    if contains_alias(&corrupted.text, &character.aliases) {
        return Err(Ineligible::ResidualMention);
    }
    if corrupted.forms.iter().any(|f| novel.characters.resolve(f).is_some()) {
        return Err(Ineligible::PoolExhausted);
    }
    if variant == CsgVariant::Cloze && (corrupted.masked != 1 || corrupted.text.matches(MASK).count() != 1) {
        return Err(Ineligible::NoReferringMention);
    }
    let target = rewrite(&format!("\"{}\"", q.text), novel, &q.speaker, &renamer, None);

    Ok(CsgItem {
        quote_id: q.quote_id.clone(),
        quote_type: q.quote_type,
        variant,
        passage: passage.to_string(),
        corrupted_passage: corrupted.text,
        target_quote: target.text,
        true_speaker: q.speaker.clone(),
        true_aliases: character.aliases.clone(),
        replacement_name: corrupted.forms[0].clone(),
        replacement_forms: corrupted.forms,
        replacement_first: first,
        replacement_gender: character.gender,
        referring_expression: q.referring_expression.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsgOutcome {
    Memorization,
    Reasoning,
    Wrong,
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Compares a predicted name with the true and replacement identities,
/// case-insensitively. The true speaker's aliases are checked first.
pub fn classify_csg(predicted: Option<&str>, item: &CsgItem, names: &NameConfig) -> CsgOutcome {
    let Some(pred) = predicted.map(str::trim).filter(|p| !p.is_empty()) else {
        return CsgOutcome::Wrong;
    };
    let p = fold(pred);
    if item.true_aliases.iter().any(|a| fold(a) == p) {
        return CsgOutcome::Memorization;
    }
    let bare = fold(names.strip_honorifics(pred));
    let reasoning = item.replacement_forms.iter().any(|f| fold(f) == p || fold(names.strip_honorifics(f)) == bare)
        || bare == fold(&item.replacement_first);
    if reasoning {
        CsgOutcome::Reasoning
    } else {
        CsgOutcome::Wrong
    }
}

#[derive(Debug, Clone)]
pub struct CsgConfig {
    pub n_per_type: usize,
    pub seed: u64,
    pub names: NameConfig,
    pub params: DecodingParams,
}

impl Default for CsgConfig {
    fn default() -> Self {
        CsgConfig { n_per_type: 100, seed: 0, names: NameConfig::default(), params: DecodingParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsgTypeResult {
    pub requested: usize,
    pub n: usize,
    /// Requested minus available eligible quotes, when positive.
    pub shortfall: usize,
    pub memorization: usize,
    pub reasoning: usize,
    pub wrong: usize,
    pub mem_accuracy: Option<f64>,
    pub reason_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsgResult {
    pub novel_id: String,
    /// Unweighted mean over quote types with at least one item.
    pub mem_accuracy: f64,
    pub reason_accuracy: f64,
    /// Memorization accuracy of explicit (masked) items alone.
    pub cloze_mem_accuracy: Option<f64>,
    pub per_type: BTreeMap<String, CsgTypeResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsgAnswer {
    pub item: CsgItem,
    pub response: String,
    pub predicted: Option<String>,
    pub outcome: CsgOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsgRun {
    pub result: CsgResult,
    pub answers: Vec<CsgAnswer>,
}

/// Eligible items per quote type, in seeded sample order, at most
/// `n_per_type` each.
pub fn sample_csg_items(novel: &Novel, cfg: &CsgConfig) -> BTreeMap<QuoteType, Vec<CsgItem>> {
    let mut out = BTreeMap::new();
    for (ti, qtype) in QuoteType::ALL.iter().enumerate() {
        let mut candidates: Vec<usize> = (0..novel.quotes.len()).filter(|&i| novel.quotes[i].quote_type == *qtype).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[ti as u64]));
        candidates.shuffle(&mut rng);
        let built: Vec<Option<CsgItem>> = candidates
            .par_iter()
            .map(|&i| build_csg_item(novel, i, &cfg.names, derive_seed(cfg.seed, &[ti as u64, i as u64])).ok())
            .collect();
        let items: Vec<CsgItem> = built.into_iter().flatten().take(cfg.n_per_type).collect();
        out.insert(*qtype, items);
    }
    out
}

fn ratio(k: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| k as f64 / n as f64)
}

pub fn run_csg(
    novel: &Novel,
    backend: &dyn Backend,
    templates: &PromptTemplates,
    cfg: &CsgConfig,
) -> Result<CsgRun, MemauditError> {
    let sampled = sample_csg_items(novel, cfg);
    if sampled.values().all(Vec::is_empty) {
        return Err(MemauditError::NoEligible { novel: novel.id.clone(), probe: "corrupted speaker guessing" });
    }
    let mut per_type = BTreeMap::new();
    let mut answers = Vec::new();
    for (qtype, items) in sampled {
        let answered: Vec<CsgAnswer> = items
            .into_par_iter()
            .map(|item| {
                let prompt = templates.csg(&CsgPromptInput {
                    cloze: item.variant == CsgVariant::Cloze,
                    title: novel.title.clone(),
                    author: novel.author.clone(),
                    corrupted_passage: item.corrupted_passage.clone(),
                    target_quote: item.target_quote.clone(),
                    referring_expression: item.referring_expression.clone(),
                })?;
                let response = backend.complete(&prompt, &cfg.params)?;
                let predicted = parse_speaker_tag(&response);
                let outcome = classify_csg(predicted.as_deref(), &item, &cfg.names);
                Ok(CsgAnswer { item, response, predicted, outcome })
            })
            .collect::<Result<_, MemauditError>>()?;
        let count = |o: CsgOutcome| answered.iter().filter(|a| a.outcome == o).count();
        let n = answered.len();
        let (mem, reason) = (count(CsgOutcome::Memorization), count(CsgOutcome::Reasoning));
        if n < cfg.n_per_type {
            log::info!("{}: {} {qtype} quotes eligible for CSG, wanted {}", novel.id, n, cfg.n_per_type);
        }
        per_type.insert(
            qtype.as_str().to_string(),
            CsgTypeResult {
                requested: cfg.n_per_type,
                n,
                shortfall: cfg.n_per_type.saturating_sub(n),
                memorization: mem,
                reasoning: reason,
                wrong: n - mem - reason,
                mem_accuracy: ratio(mem, n),
                reason_accuracy: ratio(reason, n),
            },
        );
        answers.extend(answered);
    }
    let mean = |f: fn(&CsgTypeResult) -> Option<f64>| {
        let v: Vec<f64> = per_type.values().filter_map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let result = CsgResult {
        novel_id: novel.id.clone(),
        mem_accuracy: mean(|t| t.mem_accuracy),
        reason_accuracy: mean(|t| t.reason_accuracy),
        cloze_mem_accuracy: per_type.get(QuoteType::Explicit.as_str()).and_then(|t| t.mem_accuracy),
        per_type,
    };
    Ok(CsgRun { result, answers })
}

//! Running the two attribution strategies over a novel and scoring them.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::{carryover, chunk_novel, Chunk, ChunkConfig, ChunkError, TokenCounter, WordCounter};
use crate::corpus::{CharacterTier, Novel, QuoteType};
use crate::inference::{parse_attribution_json, Backend, DecodingParams, InferenceError};
use crate::prompting::{format_alias_block, PromptError, PromptTemplates};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("no reports to aggregate")]
    EmptyAggregate,
    #[error("predictions do not cover quote {0}")]
    MissingPrediction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Keep the first prediction a quote receives.
    First,
    /// Feed overlap predictions forward; the latest prediction wins.
    Incremental,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::First => "first",
            Strategy::Incremental => "incremental",
        }
    }

    pub fn parse(raw: &str) -> Option<Strategy> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "first" => Some(Strategy::First),
            "incremental" => Some(Strategy::Incremental),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub quote_id: String,
    /// Name as generated; empty when the model never answered for the quote.
    pub raw_name: String,
    /// Canonical character id, when `raw_name` is a known alias.
    pub resolved: Option<String>,
    /// Index of the chunk the kept answer came from.
    pub source_chunk: Option<usize>,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub novel_id: String,
    pub strategy: Strategy,
    /// One entry per gold quote, in document order.
    pub predictions: Vec<Prediction>,
    pub chunks: usize,
    /// Chunks whose answer contained no `{...}` region.
    pub parse_failures: usize,
}

pub struct AttributionSettings<'a> {
    pub templates: &'a PromptTemplates,
    pub counter: &'a dyn TokenCounter,
    pub chunk: ChunkConfig,
    pub params: DecodingParams,
}

impl AttributionSettings<'static> {
    /// Built-in templates, word-based token counting, default window.
    pub fn defaults() -> AttributionSettings<'static> {
        static TEMPLATES: std::sync::OnceLock<PromptTemplates> = std::sync::OnceLock::new();
        AttributionSettings {
            templates: TEMPLATES.get_or_init(PromptTemplates::default),
            counter: &WordCounter,
            chunk: ChunkConfig::default(),
            params: DecodingParams::default(),
        }
    }
}

struct ChunkAnswer {
    chunk: usize,
    answers: BTreeMap<String, String>,
    failed: bool,
}

fn ask(
    chunk: &Chunk,
    index: usize,
    prompt: String,
    backend: &dyn Backend,
    params: &DecodingParams,
) -> Result<ChunkAnswer, AttributionError> {
    let response = backend.complete(&prompt, params)?;
    let parsed = parse_attribution_json(&response);
    if parsed.failed {
        log::warn!("chunk {index}: answer has no JSON object; its quotes count as wrong");
    }
    let mut answers = BTreeMap::new();
    for (local, name) in parsed.predictions {
        match chunk.global_id(local) {
            Some(global) if !name.trim().is_empty() => {
                answers.insert(global.to_string(), name);
            }
            Some(_) => {}
            None => log::warn!("chunk {index}: answer names unknown quote id {local}"),
        }
    }
    Ok(ChunkAnswer { chunk: index, answers, failed: parsed.failed })
}

fn assemble(
    novel: &Novel,
    strategy: Strategy,
    chunks: usize,
    kept: HashMap<String, (String, usize)>,
    parse_failures: usize,
) -> PredictionSet {
    let predictions = novel
        .quotes
        .iter()
        .map(|q| {
            let (raw_name, source_chunk) = match kept.get(&q.quote_id) {
                Some((name, chunk)) => (name.clone(), Some(*chunk)),
                None => (String::new(), None),
            };
            let resolved = novel.characters.resolve(&raw_name).map(str::to_string);
            Prediction { quote_id: q.quote_id.clone(), raw_name, resolved, source_chunk, strategy }
        })
        .collect();
    PredictionSet { novel_id: novel.id.clone(), strategy, predictions, chunks, parse_failures }
}

/// Prompts every chunk independently and keeps each quote's answer from
/// the earliest chunk that gave one. Chunks are sent in parallel; the
/// outcome depends only on chunk order.
pub fn run_first_strategy(
    novel: &Novel,
    backend: &dyn Backend,
    settings: &AttributionSettings<'_>,
) -> Result<PredictionSet, AttributionError> {
    let chunks = chunk_novel(novel, settings.counter, settings.chunk)?;
    let alias_block = format_alias_block(&novel.characters)?;
    let answers: Vec<ChunkAnswer> = chunks
        .par_iter()
        .enumerate()
        .filter(|(_, c)| !c.quotes.is_empty())
        .map(|(i, c)| {
            let prompt = settings.templates.attribution(&c.marked_text, &alias_block)?;
            ask(c, i, prompt, backend, &settings.params)
        })
        .collect::<Result<_, _>>()?;
    let mut kept: HashMap<String, (String, usize)> = HashMap::new();
    let mut failures = 0;
    for a in answers {
        failures += usize::from(a.failed);
        for (id, name) in a.answers {
            kept.entry(id).or_insert((name, a.chunk));
        }
    }
    Ok(assemble(novel, Strategy::First, chunks.len(), kept, failures))
}

/// Prompts chunks in order, passing along earlier answers for quotes that
/// the chunk shares with its predecessor. A quote's latest answer wins.
pub fn run_incremental_strategy(
    novel: &Novel,
    backend: &dyn Backend,
    settings: &AttributionSettings<'_>,
) -> Result<PredictionSet, AttributionError> {
    let chunks = chunk_novel(novel, settings.counter, settings.chunk)?;
    let alias_block = format_alias_block(&novel.characters)?;
    let mut latest: HashMap<String, String> = HashMap::new();
    let mut kept: HashMap<String, (String, usize)> = HashMap::new();
    let mut failures = 0;
    for (i, c) in chunks.iter().enumerate() {
        if c.quotes.is_empty() {
            continue;
        }
        let previous = carryover(&latest, c);
        let prompt = if previous.is_empty() {
            settings.templates.attribution(&c.marked_text, &alias_block)?
        } else {
            settings.templates.incremental(&c.marked_text, &alias_block, &previous)?
        };
        let a = ask(c, i, prompt, backend, &settings.params)?;
        failures += usize::from(a.failed);
        for (id, name) in a.answers {
            latest.insert(id.clone(), name.clone());
            kept.insert(id, (name, i));
        }
    }
    Ok(assemble(novel, Strategy::Incremental, chunks.len(), kept, failures))
}

pub fn run_strategy(
    strategy: Strategy,
    novel: &Novel,
    backend: &dyn Backend,
    settings: &AttributionSettings<'_>,
) -> Result<PredictionSet, AttributionError> {
    match strategy {
        Strategy::First => run_first_strategy(novel, backend, settings),
        Strategy::Incremental => run_incremental_strategy(novel, backend, settings),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCount {
    pub evaluated: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub novel_id: String,
    pub strategy: Strategy,
    /// Micro accuracy over every evaluated quote; `None` when nothing was evaluated.
    pub accuracy_all: Option<f64>,
    pub accuracy_explicit: Option<f64>,
    /// Anaphoric and implicit quotes pooled.
    pub accuracy_other: Option<f64>,
    pub counts: BTreeMap<String, TypeCount>,
    pub evaluated: usize,
    pub correct: usize,
    /// Evaluated quotes whose answer is not an alias of any character.
    pub invalid_names: usize,
    /// Evaluated quotes that never received an answer.
    pub missing: usize,
    pub parse_failures: usize,
    /// Quotes left out because their speaker is a minor character.
    pub excluded_minor: usize,
}

fn ratio(c: TypeCount) -> Option<f64> {
    (c.evaluated > 0).then(|| c.correct as f64 / c.evaluated as f64)
}

/// Whether a quote counts towards accuracy: its gold speaker must be a
/// major or intermediate character.
pub fn is_evaluated(novel: &Novel, speaker: &str) -> bool {
    matches!(novel.character_tier(speaker), Ok(CharacterTier::MajorOrIntermediate))
}

pub fn score(predictions: &PredictionSet, novel: &Novel) -> Result<AccuracyReport, AttributionError> {
    let by_id: HashMap<&str, &Prediction> = predictions.predictions.iter().map(|p| (p.quote_id.as_str(), p)).collect();
    let mut counts: BTreeMap<String, TypeCount> =
        QuoteType::ALL.iter().map(|t| (t.as_str().to_string(), TypeCount::default())).collect();
    let (mut invalid, mut missing, mut excluded) = (0, 0, 0);
    for q in &novel.quotes {
        let p = by_id.get(q.quote_id.as_str()).ok_or_else(|| AttributionError::MissingPrediction(q.quote_id.clone()))?;
        if !is_evaluated(novel, &q.speaker) {
            excluded += 1;
            continue;
        }
        let c = counts.get_mut(q.quote_type.as_str()).expect("all quote types present");
        c.evaluated += 1;
        if p.resolved.as_deref() == Some(q.speaker.as_str()) {
            c.correct += 1;
        }
        if p.raw_name.trim().is_empty() {
            missing += 1;
        } else if p.resolved.is_none() {
            invalid += 1;
        }
    }
    let sum = |types: &[QuoteType]| {
        types.iter().fold(TypeCount::default(), |acc, t| {
            let c = counts[t.as_str()];
            TypeCount { evaluated: acc.evaluated + c.evaluated, correct: acc.correct + c.correct }
        })
    };
    let all = sum(&QuoteType::ALL);
    let other = sum(&[QuoteType::Anaphoric, QuoteType::Implicit]);
    Ok(AccuracyReport {
        novel_id: novel.id.clone(),
        strategy: predictions.strategy,
        accuracy_all: ratio(all),
        accuracy_explicit: ratio(counts[QuoteType::Explicit.as_str()]),
        accuracy_other: ratio(other),
        evaluated: all.evaluated,
        correct: all.correct,
        counts,
        invalid_names: invalid,
        missing,
        parse_failures: predictions.parse_failures,
        excluded_minor: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single novel.
    pub std: f64,
    pub n: usize,
}

/// Mean and sample standard deviation of the non-missing values.
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
    Some(MeanStd { mean, std, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub novels: usize,
    pub accuracy_all: Option<MeanStd>,
    pub accuracy_explicit: Option<MeanStd>,
    pub accuracy_other: Option<MeanStd>,
}

/// Macro average over novels.
pub fn aggregate(reports: &[AccuracyReport]) -> Result<CorpusSummary, AttributionError> {
    if reports.is_empty() {
        return Err(AttributionError::EmptyAggregate);
    }
    let pick = |f: fn(&AccuracyReport) -> Option<f64>| mean_std(&reports.iter().filter_map(f).collect::<Vec<_>>());
    Ok(CorpusSummary {
        novels: reports.len(),
        accuracy_all: pick(|r| r.accuracy_all),
        accuracy_explicit: pick(|r| r.accuracy_explicit),
        accuracy_other: pick(|r| r.accuracy_other),
    })
}

/// `predictions.csv`: one row per quote. `correct` is blank for quotes
/// outside the evaluation set.
pub fn predictions_csv(set: &PredictionSet, novel: &Novel) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quote_id", "raw_name", "resolved", "correct", "quote_type", "strategy"])?;
    for p in &set.predictions {
        let Some(q) = novel.quote(&p.quote_id) else { continue };
        let correct = if is_evaluated(novel, &q.speaker) {
            if p.resolved.as_deref() == Some(q.speaker.as_str()) {
                "true"
            } else {
                "false"
            }
        } else {
            ""
        };
        w.write_record([
            p.quote_id.as_str(),
            p.raw_name.as_str(),
            p.resolved.as_deref().unwrap_or(""),
            correct,
            q.quote_type.as_str(),
            set.strategy.as_str(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

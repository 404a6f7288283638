//! One function per subcommand. Each writes its artifacts under the output
//! directory and prints a short summary.

use std::collections::BTreeMap;
use std::path::Path;

use qattr_core::attribution::{
    aggregate, predictions_csv, run_strategy, score, AccuracyReport, AttributionSettings, CorpusSummary, PredictionSet, Strategy,
};
use qattr_core::chunking::WordCounter;
use qattr_core::corpus::{discover_novels, load_novel_dir, Novel, SubsetTag};
use qattr_core::inference::Backend;
use qattr_core::memaudit::{
    run_csg, run_min_k, run_name_cloze, CsgConfig, CsgResult, MemauditError, MinKConfig, MinKResult, NameClozeConfig,
    NameClozeResult, NameClozeRun,
};
use qattr_core::prompting::PromptTemplates;
use qattr_core::stats::{
    fit_logistic, propensity_match, standardize, t_paired, LogisticFit, MatchedPair, StatsError, TestResult, Unit,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    fmt_opt, read_json, read_optional, remove_stale, write_json, write_text, Layout, Manifest, NovelEntry, MANIFEST_VERSION,
};
use crate::backend::build_backend;
use crate::config::RunConfig;
use crate::error::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub layout: Layout,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Context, CliError> {
        cfg.validate()?;
        let layout = Layout::new(&cfg.output);
        Ok(Context { cfg, layout })
    }

    pub fn manifest(&self) -> Result<Manifest, CliError> {
        let path = self.layout.manifest();
        if !path.exists() {
            return Err(CliError::Prerequisite(format!("no manifest at {}; run `qattr ingest` first", path.display())));
        }
        read_json(&path)
    }

    /// Loads every novel listed in the manifest.
    pub fn novels(&self) -> Result<Vec<Novel>, CliError> {
        let manifest = self.manifest()?;
        let opts = self.cfg.corpus_options();
        manifest
            .novels
            .iter()
            .map(|e| load_novel_dir(&e.path, &opts).map_err(|err| CliError::Corpus(format!("{}: {err}", e.id))))
            .collect()
    }

    pub fn templates(&self) -> Result<PromptTemplates, CliError> {
        match &self.cfg.templates_dir {
            Some(dir) => Ok(PromptTemplates::with_overrides(dir)?),
            None => Ok(PromptTemplates::default()),
        }
    }

    pub fn backend(&self, novels: &[Novel]) -> Result<Box<dyn Backend>, CliError> {
        build_backend(&self.cfg.backend, novels)
    }

    /// Runs `f` over the novels on a pool of `jobs` threads; results keep corpus order.
    pub fn per_novel<T, F>(&self, novels: &[Novel], f: F) -> Result<Vec<T>, CliError>
    where
        T: Send,
        F: Fn(&Novel) -> Result<T, CliError> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.jobs)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| novels.par_iter().map(&f).collect())
    }
}

pub fn subset_name(tag: SubsetTag) -> String {
    serde_json::to_value(tag).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn ingest(ctx: &Context) -> Result<Manifest, CliError> {
    let root = &ctx.cfg.corpus;
    if !root.is_dir() {
        return Err(CliError::Corpus(format!("corpus root {} is not a directory", root.display())));
    }
    let dirs = discover_novels(root)?;
    if dirs.is_empty() {
        return Err(CliError::Corpus(format!("no novel directories (holding novel.txt) under {}", root.display())));
    }
    let opts = ctx.cfg.corpus_options();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for dir in &dirs {
        match load_novel_dir(dir, &opts) {
            Ok(novel) => entries.push(NovelEntry::describe(&novel, dir)),
            Err(e) => failures.push(format!("{}: {e}", dir.display())),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("{f}");
        }
        return Err(CliError::Corpus(format!(
            "{} of {} novels failed validation:\n{}",
            failures.len(),
            dirs.len(),
            failures.join("\n")
        )));
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        corpus: root.clone(),
        config: ctx.cfg.clone(),
        total_quotes: entries.iter().map(|e| e.quotes).sum(),
        novels: entries,
    };
    write_json(&ctx.layout.manifest(), &manifest)?;
    println!("{:<28} {:>6} {:>7} {:>8} {:>6} {:>6}", "novel", "subset", "quotes", "chapters", "major", "minor");
    for e in &manifest.novels {
        println!(
            "{:<28} {:>6} {:>7} {:>8} {:>6} {:>6}",
            e.id,
            subset_name(e.subset),
            e.quotes,
            e.chapters,
            e.major_or_intermediate,
            e.minor
        );
    }
    println!("{} novels, {} quotes", manifest.novels.len(), manifest.total_quotes);
    Ok(manifest)
}

pub fn attribute(ctx: &Context, strategy: Strategy) -> Result<Vec<PredictionSet>, CliError> {
    let novels = ctx.novels()?;
    let backend = ctx.backend(&novels)?;
    let templates = ctx.templates()?;
    let settings = AttributionSettings {
        templates: &templates,
        counter: &WordCounter,
        chunk: ctx.cfg.chunking.chunk_config(),
        params: ctx.cfg.backend.params(),
    };
    let sets = ctx.per_novel(&novels, |novel| {
        let set = run_strategy(strategy, novel, backend.as_ref(), &settings)?;
        write_json(&ctx.layout.predictions_json(&novel.id, strategy), &set)?;
        let csv = predictions_csv(&set, novel).map_err(|e| CliError::Backend(format!("{}: {e}", novel.id)))?;
        write_text(&ctx.layout.predictions_csv(&novel.id, strategy), &csv)?;
        Ok(set)
    })?;
    for s in &sets {
        println!("{:<28} {} chunks, {} parse failures", s.novel_id, s.chunks, s.parse_failures);
    }
    Ok(sets)
}

/// Scores stored predictions, if the novel has any for `strategy`.
pub fn score_stored(layout: &Layout, novel: &Novel, strategy: Strategy) -> Result<Option<AccuracyReport>, CliError> {
    let Some(set) = read_optional::<PredictionSet>(&layout.predictions_json(&novel.id, strategy))? else {
        return Ok(None);
    };
    score(&set, novel).map(Some).map_err(CliError::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub strategy: Strategy,
    pub overall: CorpusSummary,
    pub by_subset: BTreeMap<String, CorpusSummary>,
}

pub fn evaluate(ctx: &Context, strategy: Strategy) -> Result<EvaluationSummary, CliError> {
    let novels = ctx.novels()?;
    let mut reports = Vec::new();
    for novel in &novels {
        let report = score_stored(&ctx.layout, novel, strategy)?.ok_or_else(|| {
            CliError::Prerequisite(format!(
                "{}: no {} predictions; run `qattr attribute --strategy {}` first",
                novel.id,
                strategy.as_str(),
                strategy.as_str()
            ))
        })?;
        write_json(&ctx.layout.report_json(&novel.id, strategy), &report)?;
        reports.push((novel.subset, report));
    }
    let all: Vec<AccuracyReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let mut by_subset = BTreeMap::new();
    for tag in [SubsetTag::Pdnc1, SubsetTag::Pdnc2, SubsetTag::Unseen] {
        let part: Vec<AccuracyReport> = reports.iter().filter(|(t, _)| *t == tag).map(|(_, r)| r.clone()).collect();
        if !part.is_empty() {
            by_subset.insert(subset_name(tag), aggregate(&part)?);
        }
    }
    let summary = EvaluationSummary { strategy, overall: aggregate(&all)?, by_subset };
    write_json(&ctx.layout.summary(strategy), &summary)?;
    println!("{:<28} {:>9} {:>9} {:>9} {:>8}", "novel", "all", "explicit", "other", "invalid");
    for r in &all {
        println!(
            "{:<28} {:>9} {:>9} {:>9} {:>8}",
            r.novel_id,
            fmt_opt(r.accuracy_all),
            fmt_opt(r.accuracy_explicit),
            fmt_opt(r.accuracy_other),
            r.invalid_names
        );
    }
    if let Some(m) = summary.overall.accuracy_all {
        println!("{} overall: {:.4} ({:.4}) over {} novels", strategy.as_str(), m.mean, m.std, m.n);
    }
    Ok(summary)
}

/// Maps "nothing eligible" to `None` after clearing any stale artifact.
fn skip_ineligible<T>(result: Result<T, MemauditError>, stale: &[&Path]) -> Result<Option<T>, CliError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e @ MemauditError::NoEligible { .. }) => {
            log::warn!("{e}");
            for p in stale {
                remove_stale(p)?;
            }
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn csg(ctx: &Context) -> Result<Vec<Option<CsgResult>>, CliError> {
    let novels = ctx.novels()?;
    let backend = ctx.backend(&novels)?;
    let templates = ctx.templates()?;
    let cfg = CsgConfig {
        n_per_type: ctx.cfg.csg.n_per_type,
        seed: ctx.cfg.seed,
        params: ctx.cfg.backend.params(),
        ..CsgConfig::default()
    };
    let results = ctx.per_novel(&novels, |novel| {
        let (items, result) = (ctx.layout.csg_items(&novel.id), ctx.layout.csg_result(&novel.id));
        let Some(run) = skip_ineligible(run_csg(novel, backend.as_ref(), &templates, &cfg), &[&items, &result])? else {
            return Ok(None);
        };
        let mut lines = String::new();
        for a in &run.answers {
            lines.push_str(&serde_json::to_string(a).expect("answer serializes"));
            lines.push('\n');
        }
        write_text(&items, &lines)?;
        write_json(&result, &run.result)?;
        Ok(Some(run.result))
    })?;
    println!("{:<28} {:>9} {:>9} {:>9}", "novel", "csg_mem", "cloze", "csg_reas");
    for (novel, r) in novels.iter().zip(&results) {
        match r {
            Some(r) => println!(
                "{:<28} {:>9.4} {:>9} {:>9.4}",
                novel.id,
                r.mem_accuracy,
                fmt_opt(r.cloze_mem_accuracy),
                r.reason_accuracy
            ),
            None => println!("{:<28} no eligible quotes", novel.id),
        }
    }
    Ok(results)
}

pub fn name_cloze(ctx: &Context) -> Result<Vec<Option<NameClozeResult>>, CliError> {
    let novels = ctx.novels()?;
    let backend = ctx.backend(&novels)?;
    let templates = ctx.templates()?;
    let cfg = NameClozeConfig {
        n_samples: ctx.cfg.name_cloze.n_samples,
        window_words: ctx.cfg.name_cloze.window_words,
        seed: ctx.cfg.seed,
        params: ctx.cfg.backend.params(),
    };
    let results = ctx.per_novel(&novels, |novel| {
        let path = ctx.layout.name_cloze(&novel.id);
        let Some(run) = skip_ineligible(run_name_cloze(novel, backend.as_ref(), &templates, &cfg), &[&path])? else {
            return Ok(None);
        };
        write_json(&path, &run)?;
        Ok(Some(run.result))
    })?;
    for (novel, r) in novels.iter().zip(&results) {
        match r {
            Some(r) => println!("{:<28} name cloze {:.4} ({}/{})", novel.id, r.accuracy, r.correct, r.n),
            None => println!("{:<28} no eligible mentions", novel.id),
        }
    }
    Ok(results)
}

pub fn mink(ctx: &Context) -> Result<Vec<Option<Vec<MinKResult>>>, CliError> {
    let novels = ctx.novels()?;
    let backend = ctx.backend(&novels)?;
    backend.require_scoring()?;
    let cfg = MinKConfig { k_values: ctx.cfg.mink.k_values.clone(), sample_frac: ctx.cfg.mink.sample_frac, seed: ctx.cfg.seed };
    let results = ctx.per_novel(&novels, |novel| {
        let path = ctx.layout.mink(&novel.id);
        let Some(rows) = skip_ineligible(run_min_k(novel, backend.as_ref(), &cfg), &[&path])? else {
            return Ok(None);
        };
        write_json(&path, &rows)?;
        Ok(Some(rows))
    })?;
    for (novel, r) in novels.iter().zip(&results) {
        if let Some(rows) = r {
            let cells: Vec<String> = rows.iter().map(|m| format!("k={}: {:.4}", m.k, m.value)).collect();
            println!("{:<28} {}", novel.id, cells.join("  "));
        }
    }
    Ok(results)
}

/// Audit measurements stored for one novel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditValues {
    pub name_cloze: Option<f64>,
    pub csg_mem: Option<f64>,
    pub csg_mem_cloze: Option<f64>,
    pub csg_reason: Option<f64>,
    pub mink: Vec<MinKResult>,
}

impl AuditValues {
    pub fn load(layout: &Layout, id: &str) -> Result<AuditValues, CliError> {
        let nc: Option<NameClozeRun> = read_optional(&layout.name_cloze(id))?;
        let csg: Option<CsgResult> = read_optional(&layout.csg_result(id))?;
        let mink: Option<Vec<MinKResult>> = read_optional(&layout.mink(id))?;
        Ok(AuditValues {
            name_cloze: nc.map(|r| r.result.accuracy),
            csg_mem: csg.as_ref().map(|r| r.mem_accuracy),
            csg_mem_cloze: csg.as_ref().and_then(|r| r.cloze_mem_accuracy),
            csg_reason: csg.as_ref().map(|r| r.reason_accuracy),
            mink: mink.unwrap_or_default(),
        })
    }

    pub fn mink_at(&self, k: f64) -> Option<f64> {
        self.mink.iter().find(|m| (m.k - k).abs() < 1e-9).map(|m| m.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestOutcome {
    Done(TestResult),
    Failed { error: String },
}

impl From<Result<TestResult, StatsError>> for TestOutcome {
    fn from(r: Result<TestResult, StatsError>) -> Self {
        match r {
            Ok(t) => TestOutcome::Done(t),
            Err(e) => TestOutcome::Failed { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNovel {
    pub id: String,
    pub subset: SubsetTag,
    pub covariates: Vec<f64>,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub strategy: Strategy,
    pub covariates: Vec<String>,
    /// Covariates left out of the fit because they were constant.
    pub dropped_covariates: Vec<String>,
    pub fit: LogisticFit,
    pub novels: Vec<ScoredNovel>,
    pub pairs: Vec<MatchedPair>,
    /// Paired one-sided tests of control > treated over the matched pairs.
    pub tests: BTreeMap<String, TestOutcome>,
}

pub fn contamination(ctx: &Context, strategy: Strategy) -> Result<ContaminationReport, CliError> {
    let k = ctx.cfg.contamination.mink_k;
    let novels = ctx.novels()?;
    let names = ["name_cloze".to_string(), "csg_mem".to_string(), format!("mink_k{k}"), "accuracy_all".to_string()];
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for novel in novels.iter().filter(|n| n.subset != SubsetTag::Unseen) {
        let audit = AuditValues::load(&ctx.layout, &novel.id)?;
        let acc = score_stored(&ctx.layout, novel, strategy)?.and_then(|r| r.accuracy_all);
        let values = [(audit.name_cloze, "namecloze"), (audit.csg_mem, "csg"), (audit.mink_at(k), "mink"), (acc, "attribute")];
        let lacking: Vec<&str> = values.iter().filter(|(v, _)| v.is_none()).map(|(_, c)| *c).collect();
        if !lacking.is_empty() {
            missing.push(format!("{} (run {})", novel.id, lacking.join(", ")));
            continue;
        }
        rows.push((novel, values.iter().map(|(v, _)| v.unwrap()).collect::<Vec<f64>>(), audit));
    }
    if !missing.is_empty() {
        return Err(CliError::Prerequisite(format!("covariates missing for: {}", missing.join("; "))));
    }
    let treated_n = rows.iter().filter(|(n, _, _)| n.subset == SubsetTag::Pdnc2).count();
    if treated_n == 0 {
        return Err(CliError::Prerequisite("no novels tagged PDNC2 to act as treated units".into()));
    }

    let keep: Vec<usize> = (0..names.len()).filter(|&j| rows.iter().any(|(_, v, _)| (v[j] - rows[0].1[j]).abs() > 0.0)).collect();
    let dropped: Vec<String> = (0..names.len()).filter(|j| !keep.contains(j)).map(|j| names[j].clone()).collect();
    let raw: Vec<Vec<f64>> = rows.iter().map(|(_, v, _)| keep.iter().map(|&j| v[j]).collect()).collect();
    let design = if keep.is_empty() {
        raw.clone()
    } else {
        standardize(&raw).map_err(|e| CliError::Prerequisite(format!("covariates: {e}")))?
    };
    let y: Vec<f64> = rows.iter().map(|(n, _, _)| if n.subset == SubsetTag::Pdnc2 { 1.0 } else { 0.0 }).collect();
    let fit = fit_logistic(&design, &y).map_err(|e| CliError::Prerequisite(format!("logistic fit: {e}")))?;
    if fit.separated {
        log::warn!("propensity model separates the subsets perfectly; scores are extreme");
    }

    let mut scored = Vec::new();
    let (mut treated, mut controls) = (Vec::new(), Vec::new());
    for ((novel, values, _), z) in rows.iter().zip(&design) {
        let p = fit.predict(z);
        scored.push(ScoredNovel { id: novel.id.clone(), subset: novel.subset, covariates: values.clone(), propensity: p });
        let unit = Unit { id: novel.id.clone(), score: p, covariates: values.clone() };
        if novel.subset == SubsetTag::Pdnc2 {
            treated.push(unit);
        } else {
            controls.push(unit);
        }
    }
    let pairs = propensity_match(&treated, &controls).map_err(|e| CliError::Prerequisite(format!("matching: {e}")))?;

    let by_id: BTreeMap<&str, &(&Novel, Vec<f64>, AuditValues)> = rows.iter().map(|r| (r.0.id.as_str(), r)).collect();
    let mut tests = BTreeMap::new();
    let mut ks: Vec<f64> = ctx.cfg.mink.k_values.clone();
    ks.sort_by(f64::total_cmp);
    for kv in ks {
        let side = |id: &str| by_id[id].2.mink_at(kv);
        let vals: Option<(Vec<f64>, Vec<f64>)> = pairs
            .iter()
            .map(|p| Some((side(&p.control)?, side(&p.treated)?)))
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().unzip());
        let outcome = match vals {
            Some((c, t)) => t_paired(&c, &t).into(),
            None => TestOutcome::Failed { error: format!("Min-K% at k={kv} missing for a matched novel") },
        };
        tests.insert(format!("mink_k{kv}"), outcome);
    }
    let acc_idx = names.len() - 1;
    let (c, t): (Vec<f64>, Vec<f64>) =
        pairs.iter().map(|p| (by_id[p.control.as_str()].1[acc_idx], by_id[p.treated.as_str()].1[acc_idx])).unzip();
    tests.insert("accuracy_all".to_string(), t_paired(&c, &t).into());

    let report = ContaminationReport {
        strategy,
        covariates: keep.iter().map(|&j| names[j].clone()).collect(),
        dropped_covariates: dropped,
        fit,
        novels: scored,
        pairs,
        tests,
    };
    write_json(&ctx.layout.contamination(), &report)?;
    for p in &report.pairs {
        println!("{:<28} -> {:<28} |d| = {:.4}", p.treated, p.control, p.distance());
    }
    for (name, t) in &report.tests {
        match t {
            TestOutcome::Done(t) => {
                println!("{name}: t = {:.4}, p = {:.4}", t.statistic, t.p_value)
            }
            TestOutcome::Failed { error } => println!("{name}: {error}"),
        }
    }
    Ok(report)
}

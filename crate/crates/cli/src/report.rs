//! Corpus-level tables assembled from whatever artifacts exist.

use std::collections::BTreeMap;
use std::path::Path;

use qattr_core::attribution::{mean_std, AccuracyReport, MeanStd, Strategy};
use qattr_core::corpus::{Novel, SubsetTag};
use qattr_core::stats::{read_search_counts, spearman, top_bottom_test};

use crate::artifacts::{csv_string, fmt_f, fmt_opt, write_text, ABSENT};
use crate::commands::{score_stored, subset_name, AuditValues, Context};
use crate::error::CliError;

/// Files written by `report`, relative to the output directory.
pub const TABLE1: &str = "table1.csv";
pub const TABLE2: &str = "table2.csv";
pub const TABLE5: &str = "table5.csv";
pub const FIG2: &str = "fig2_mink.csv";
pub const SEARCH: &str = "search_correlations.csv";

struct NovelRow<'a> {
    novel: &'a Novel,
    accuracy: BTreeMap<Strategy, AccuracyReport>,
    audit: AuditValues,
}

type Measure = (&'static str, fn(&AuditValues) -> Option<f64>);

const MEASURES: [Measure; 4] = [
    ("name_cloze", |a| a.name_cloze),
    ("csg_mem", |a| a.csg_mem),
    ("csg_mem_cloze", |a| a.csg_mem_cloze),
    ("csg_reason", |a| a.csg_reason),
];

type AccuracyKind = (&'static str, fn(&AccuracyReport) -> Option<f64>);

const ACCURACIES: [AccuracyKind; 3] = [
    ("accuracy_all", |r| r.accuracy_all),
    ("accuracy_explicit", |r| r.accuracy_explicit),
    ("accuracy_other", |r| r.accuracy_other),
];

fn mean_or_absent(values: Vec<f64>) -> (String, String) {
    match mean_std(&values) {
        Some(MeanStd { mean, std, .. }) => (fmt_f(mean), fmt_f(std)),
        None => (ABSENT.to_string(), ABSENT.to_string()),
    }
}

pub fn report(ctx: &Context, search_counts: Option<&Path>) -> Result<Vec<String>, CliError> {
    let novels = ctx.novels()?;
    let mut rows = Vec::new();
    for novel in &novels {
        let mut accuracy = BTreeMap::new();
        for s in [Strategy::First, Strategy::Incremental] {
            if let Some(r) = score_stored(&ctx.layout, novel, s)? {
                accuracy.insert(s, r);
            }
        }
        rows.push(NovelRow { novel, accuracy, audit: AuditValues::load(&ctx.layout, &novel.id)? });
    }
    let strategies: Vec<Strategy> = [Strategy::First, Strategy::Incremental]
        .into_iter()
        .filter(|s| rows.iter().any(|r| r.accuracy.contains_key(s)))
        .collect();
    if strategies.is_empty() {
        return Err(CliError::Prerequisite("no predictions found; run `qattr attribute` first".into()));
    }
    let primary = if strategies.contains(&ctx.cfg.strategy) { ctx.cfg.strategy } else { strategies[0] };
    let mut ks = ctx.cfg.mink.k_values.clone();
    ks.sort_by(f64::total_cmp);

    let mut written = vec![TABLE1.to_string(), TABLE5.to_string(), TABLE2.to_string(), FIG2.to_string()];
    write_text(&ctx.layout.table(TABLE1), &table1(&rows, &strategies))?;
    write_text(&ctx.layout.table(TABLE5), &table5(&rows, primary, &ks))?;
    write_text(&ctx.layout.table(TABLE2), &table2(&rows, primary, ctx.cfg.report.top_k))?;
    write_text(&ctx.layout.table(FIG2), &fig2(&rows))?;
    if let Some(path) = search_counts {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let table = read_search_counts(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        write_text(&ctx.layout.table(SEARCH), &search_table(&rows, &table))?;
        written.push(SEARCH.to_string());
    }

    for s in &strategies {
        let values: Vec<f64> = rows.iter().filter_map(|r| r.accuracy.get(s).and_then(|a| a.accuracy_all)).collect();
        if let Some(m) = mean_std(&values) {
            println!("{:<12} accuracy {:.4} ({:.4}) over {} novels", s.as_str(), m.mean, m.std, m.n);
        }
    }
    println!("wrote {}", written.join(", "));
    Ok(written)
}

/// Mean (sd) accuracy per subset and strategy, plus audit means.
fn table1(rows: &[NovelRow], strategies: &[Strategy]) -> String {
    let mut header: Vec<String> = ["subset", "strategy", "novels"].map(String::from).to_vec();
    for (name, _) in ACCURACIES {
        header.push(name.to_string());
        header.push(format!("{name}_sd"));
    }
    header.extend(MEASURES.iter().map(|(n, _)| n.to_string()));
    let mut out = Vec::new();
    let mut groups: Vec<(String, Vec<&NovelRow>)> = Vec::new();
    for tag in [SubsetTag::Pdnc1, SubsetTag::Pdnc2, SubsetTag::Unseen] {
        let g: Vec<&NovelRow> = rows.iter().filter(|r| r.novel.subset == tag).collect();
        if !g.is_empty() {
            groups.push((subset_name(tag), g));
        }
    }
    groups.push(("all".to_string(), rows.iter().collect()));
    for s in strategies {
        for (label, group) in &groups {
            let scored: Vec<&&NovelRow> = group.iter().filter(|r| r.accuracy.contains_key(s)).collect();
            let mut line = vec![label.clone(), s.as_str().to_string(), scored.len().to_string()];
            for (_, get) in ACCURACIES {
                let (m, sd) = mean_or_absent(scored.iter().filter_map(|r| get(&r.accuracy[s])).collect());
                line.push(m);
                line.push(sd);
            }
            for (_, get) in MEASURES {
                line.push(mean_or_absent(group.iter().filter_map(|r| get(&r.audit)).collect()).0);
            }
            out.push(line);
        }
    }
    csv_string(&header, &out)
}

/// Per-novel accuracy next to every memorization measure.
fn table5(rows: &[NovelRow], strategy: Strategy, ks: &[f64]) -> String {
    let mink_cols: Vec<String> = ks.iter().map(|k| format!("mink_k{k}")).collect();
    let mut header: Vec<&str> = vec!["novel_id", "title", "subset", "strategy"];
    header.extend(ACCURACIES.iter().map(|(n, _)| *n));
    header.extend(MEASURES.iter().map(|(n, _)| *n));
    header.extend(mink_cols.iter().map(String::as_str));
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let acc = r.accuracy.get(&strategy);
            let mut line =
                vec![r.novel.id.clone(), r.novel.title.clone(), subset_name(r.novel.subset), strategy.as_str().to_string()];
            for (_, get) in ACCURACIES {
                line.push(fmt_opt(acc.and_then(get)));
            }
            for (_, get) in MEASURES {
                line.push(fmt_opt(get(&r.audit)));
            }
            for k in ks {
                line.push(fmt_opt(r.audit.mink_at(*k)));
            }
            line
        })
        .collect();
    csv_string(&header, &out)
}

/// Spearman correlation and top/bottom-k test between each memorization
/// measure and each accuracy column.
fn table2(rows: &[NovelRow], strategy: Strategy, top_k: usize) -> String {
    let header = [
        "measure",
        "accuracy",
        "novels",
        "rho",
        "rho_p",
        "rho_significant",
        "top_bottom_t",
        "top_bottom_p",
        "top_bottom_significant",
        "note",
    ];
    let mut out = Vec::new();
    for (measure, get_m) in MEASURES {
        for (acc_name, get_a) in ACCURACIES {
            let pairs: Vec<(String, f64, f64)> = rows
                .iter()
                .filter_map(|r| Some((r.novel.id.clone(), get_m(&r.audit)?, get_a(r.accuracy.get(&strategy)?)?)))
                .collect();
            let mut line = vec![measure.to_string(), acc_name.to_string(), pairs.len().to_string()];
            let mut notes = Vec::new();
            if pairs.is_empty() {
                line.extend(std::iter::repeat_n(ABSENT.to_string(), 6));
                line.push(String::new());
                out.push(line);
                continue;
            }
            let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            match spearman(&x, &y) {
                Ok(t) => line.extend([fmt_f(t.statistic), fmt_f(t.p_value), t.significant_at_5pct.to_string()]),
                Err(e) => {
                    line.extend(std::iter::repeat_n("n/a".to_string(), 3));
                    notes.push(format!("rho: {e}"));
                }
            }
            match top_bottom_test(&pairs, top_k) {
                Ok(t) => line.extend([fmt_f(t.statistic), fmt_f(t.p_value), t.significant_at_5pct.to_string()]),
                Err(e) => {
                    line.extend(std::iter::repeat_n("n/a".to_string(), 3));
                    notes.push(format!("top/bottom: {e}"));
                }
            }
            line.push(notes.join("; "));
            out.push(line);
        }
    }
    csv_string(&header, &out)
}

/// Long-format Min-K% series for plotting.
fn fig2(rows: &[NovelRow]) -> String {
    let mut out = Vec::new();
    for r in rows {
        let mut mink = r.audit.mink.clone();
        mink.sort_by(|a, b| a.k.total_cmp(&b.k));
        for m in mink {
            out.push(vec![
                r.novel.id.clone(),
                subset_name(r.novel.subset),
                format!("{}", m.k),
                fmt_f(m.value),
                m.sample_size.to_string(),
            ]);
        }
    }
    csv_string(&["novel_id", "subset", "k", "value", "sample_size"], &out)
}

fn search_table(rows: &[NovelRow], table: &qattr_core::stats::SearchCounts) -> String {
    let mut out = Vec::new();
    for (measure, get) in MEASURES.iter().filter(|(n, _)| *n != "csg_reason") {
        for source in &table.sources {
            let counts = table.source(source).expect("listed source");
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter_map(|r| Some((get(&r.audit)?, *counts.get(r.novel.id.as_str())?))).unzip();
            let mut line = vec![measure.to_string(), source.clone(), x.len().to_string()];
            match spearman(&x, &y) {
                Ok(t) => line.extend([fmt_f(t.statistic), fmt_f(t.p_value), t.significant_at_5pct.to_string(), String::new()]),
                Err(e) => line.extend(["n/a".to_string(), "n/a".to_string(), "n/a".to_string(), e.to_string()]),
            }
            out.push(line);
        }
    }
    csv_string(&["measure", "source", "novels", "rho", "rho_p", "rho_significant", "note"], &out)
}

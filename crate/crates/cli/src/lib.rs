//! Command-line front-end: corpus ingestion, attribution runs, memorization
//! audits and report tables, all driven by a TOML run configuration.

pub mod artifacts;
pub mod backend;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qattr_core::attribution::Strategy;
use qattr_core::synth::generate_corpus;

pub use commands::Context;
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qattr", version, about = "Quotation attribution with memorization and contamination audits")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus root holding one directory per novel.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// mock:oracle, mock:nonalias, mock:hash or http.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Novels processed in parallel.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for item sampling and replacement names.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the corpus and write manifest.json.
    Ingest,
    /// Attribute every quote; writes predictions per novel.
    Attribute {
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
    },
    /// Score stored predictions; writes report.json per novel and a corpus summary.
    Evaluate {
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
    },
    /// Corrupted speaker guessing.
    Csg {
        #[arg(long)]
        n_per_type: Option<usize>,
    },
    /// Name cloze probe.
    Namecloze {
        #[arg(long)]
        n_samples: Option<usize>,
    },
    /// Min-K% over verbalized annotation records (needs a scoring backend).
    Mink,
    /// Propensity-score matching of PDNC2 novels to PDNC1 controls with paired t-tests.
    Contamination {
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
    },
    /// Write corpus tables from the artifacts present.
    Report {
        /// CSV of per-novel search-result counts (novel id, then one column per source).
        #[arg(long)]
        search_counts: Option<PathBuf>,
    },
    /// Write a synthetic corpus for trying the pipeline.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        novels: usize,
        /// How many of the novels are tagged PDNC2.
        #[arg(long, default_value_t = 1)]
        treated: usize,
    },
}

fn parse_strategy(raw: &str) -> Result<Strategy, String> {
    Strategy::parse(raw).ok_or_else(|| format!("unknown strategy {raw:?}; expected first or incremental"))
}

impl Cli {
    /// The configuration file (or defaults) with command-line overrides applied.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.corpus {
            cfg.corpus = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if let Some(v) = &self.backend {
            cfg.backend.kind = v.clone();
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        match &self.command {
            Command::Attribute { strategy: Some(s) }
            | Command::Evaluate { strategy: Some(s) }
            | Command::Contamination { strategy: Some(s) } => {
                cfg.strategy = *s;
            }
            Command::Csg { n_per_type: Some(n) } => cfg.csg.n_per_type = *n,
            Command::Namecloze { n_samples: Some(n) } => cfg.name_cloze.n_samples = *n,
            _ => {}
        }
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    if let Command::Synth { dir, novels, treated } = &cli.command {
        if treated > novels {
            return Err(CliError::Config(format!("--treated ({treated}) exceeds --novels ({novels})")));
        }
        for s in generate_corpus(*novels, *treated, cfg.seed) {
            s.write_to(dir).map_err(|e| CliError::io(dir, e))?;
        }
        println!("wrote {novels} novels to {}", dir.display());
        return Ok(());
    }
    let ctx = Context::new(cfg)?;
    let strategy = ctx.cfg.strategy;
    match &cli.command {
        Command::Ingest => commands::ingest(&ctx).map(drop),
        Command::Attribute { .. } => commands::attribute(&ctx, strategy).map(drop),
        Command::Evaluate { .. } => commands::evaluate(&ctx, strategy).map(drop),
        Command::Csg { .. } => commands::csg(&ctx).map(drop),
        Command::Namecloze { .. } => commands::name_cloze(&ctx).map(drop),
        Command::Mink => commands::mink(&ctx).map(drop),
        Command::Contamination { .. } => commands::contamination(&ctx, strategy).map(drop),
        Command::Report { search_counts } => report::report(&ctx, search_counts.as_deref()).map(drop),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

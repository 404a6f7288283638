//! Output directory layout, the corpus manifest and JSON/CSV helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qattr_core::attribution::Strategy;
use qattr_core::corpus::{CharacterTier, Novel, SubsetTag};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Where every artifact lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Layout {
        Layout { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn novel_dir(&self, id: &str) -> PathBuf {
        self.root.join("novels").join(id)
    }

    pub fn predictions_json(&self, id: &str, s: Strategy) -> PathBuf {
        self.novel_dir(id).join(s.as_str()).join("predictions.json")
    }

    pub fn predictions_csv(&self, id: &str, s: Strategy) -> PathBuf {
        self.novel_dir(id).join(s.as_str()).join("predictions.csv")
    }

    pub fn report_json(&self, id: &str, s: Strategy) -> PathBuf {
        self.novel_dir(id).join(s.as_str()).join("report.json")
    }

    pub fn summary(&self, s: Strategy) -> PathBuf {
        self.root.join(format!("summary_{}.json", s.as_str()))
    }

    pub fn csg_items(&self, id: &str) -> PathBuf {
        self.novel_dir(id).join("csg_items.jsonl")
    }

    pub fn csg_result(&self, id: &str) -> PathBuf {
        self.novel_dir(id).join("csg_result.json")
    }

    pub fn name_cloze(&self, id: &str) -> PathBuf {
        self.novel_dir(id).join("name_cloze.json")
    }

    pub fn mink(&self, id: &str) -> PathBuf {
        self.novel_dir(id).join("mink.json")
    }

    pub fn contamination(&self) -> PathBuf {
        self.root.join("contamination.json")
    }

    pub fn table(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovelEntry {
    pub id: String,
    pub path: PathBuf,
    pub title: String,
    pub author: String,
    pub subset: SubsetTag,
    pub chapters: usize,
    pub quotes: usize,
    pub quote_types: BTreeMap<String, usize>,
    pub characters: usize,
    pub major_or_intermediate: usize,
    pub minor: usize,
    pub evaluated_quotes: usize,
}

impl NovelEntry {
    pub fn describe(novel: &Novel, path: &Path) -> NovelEntry {
        let mut quote_types = BTreeMap::new();
        for q in &novel.quotes {
            *quote_types.entry(q.quote_type.as_str().to_string()).or_insert(0) += 1;
        }
        let (major, minor) = novel.tier_counts();
        let evaluated = novel
            .quotes
            .iter()
            .filter(|q| matches!(novel.character_tier(&q.speaker), Ok(CharacterTier::MajorOrIntermediate)))
            .count();
        NovelEntry {
            id: novel.id.clone(),
            path: path.to_path_buf(),
            title: novel.title.clone(),
            author: novel.author.clone(),
            subset: novel.subset,
            chapters: novel.chapters.len(),
            quotes: novel.quotes.len(),
            quote_types,
            characters: novel.characters.len(),
            major_or_intermediate: major,
            minor,
            evaluated_quotes: evaluated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub corpus: PathBuf,
    pub config: RunConfig,
    pub total_quotes: usize,
    pub novels: Vec<NovelEntry>,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Prerequisite(format!("{}: unreadable artifact: {e}", path.display())))
}

/// Reads an artifact if present.
pub fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, CliError> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn remove_stale(path: &Path) -> Result<(), CliError> {
    match std::fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn csv_string<H: AsRef<[u8]>>(header: &[H], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// Fixed-precision rendering so reruns produce identical bytes.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

pub const ABSENT: &str = "absent";

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_else(|| ABSENT.to_string())
}

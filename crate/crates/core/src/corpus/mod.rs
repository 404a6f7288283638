//! Annotated novels: text, chapters, quotes and character lists.
//!
//! A novel lives in its own directory:
//!
//! * `novel.txt`: the plain text; offsets in the annotations are byte offsets into it.
//! * `quotation_info.csv`: one row per quote, eleven columns (see [`record::COLUMNS`]).
//! * `characters.csv`: `canonical,aliases,gender` (or the one-line-per-character
//!   `Canonical=Alias=...` layout).
//! * `metadata.json`: optional `{ "title", "author", "subset" }`.

pub mod alias;
pub mod pylit;
pub mod record;
pub mod segment;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alias::{parse_character_list, resolve_alias, AliasMap, Character, Gender};
pub use record::{parse_verbalized, read_records, verbalize_record, write_records, AnnotationRecord, COLUMNS};
pub use segment::segment_sentences;

/// Characters uttering at least this many quotes are evaluated.
pub const MAJOR_CHARACTER_MIN_QUOTES: usize = 10;

/// Matches lines beginning with "Chapter" and short all-caps heading lines.
pub const DEFAULT_HEADING_PATTERN: &str = r"(?m)^[ \t]*(?:(?:Chapter|CHAPTER)\b[^\n]*|[A-Z][A-Z0-9 .,:;'\-]*[A-Z0-9.])[ \t]*\r?$";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("character list is empty")]
    EmptyCharacterList,
    #[error("alias {alias:?} is claimed by both {first:?} and {second:?}")]
    DuplicateAlias { alias: String, first: String, second: String },
    #[error("expected {expected} columns, found {found}")]
    ColumnCount { expected: usize, found: usize },
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("{file}: {detail}")]
    Csv { file: &'static str, detail: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown character {0:?}")]
    UnknownCharacter(String),
    #[error("invalid chapter heading pattern: {0}")]
    BadPattern(String),
    #[error("novel {novel} failed validation:\n  {}", issues.join("\n  "))]
    Validation { novel: String, issues: Vec<String> },
}

impl CorpusError {
    pub(crate) fn csv(file: &'static str, e: csv::Error) -> CorpusError {
        CorpusError::Csv { file, detail: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuoteType {
    Explicit,
    Anaphoric,
    Implicit,
}

impl QuoteType {
    pub const ALL: [QuoteType; 3] = [QuoteType::Explicit, QuoteType::Anaphoric, QuoteType::Implicit];

    pub fn parse(raw: &str) -> Option<QuoteType> {
        match raw.trim() {
            "Explicit" => Some(QuoteType::Explicit),
            "Anaphoric" => Some(QuoteType::Anaphoric),
            "Implicit" => Some(QuoteType::Implicit),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuoteType::Explicit => "Explicit",
            QuoteType::Anaphoric => "Anaphoric",
            QuoteType::Implicit => "Implicit",
        }
    }
}

impl fmt::Display for QuoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum SubsetTag {
    #[default]
    #[serde(rename = "PDNC1")]
    Pdnc1,
    #[serde(rename = "PDNC2")]
    Pdnc2,
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CharacterTier {
    MajorOrIntermediate,
    Minor,
}

/// The three mention columns, kept as their raw cell text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MentionLists {
    pub texts: String,
    pub spans: String,
    pub entities: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub quote_id: String,
    pub text: String,
    pub sub_quotations: Vec<String>,
    pub byte_spans: Vec<(usize, usize)>,
    /// Canonical id of the gold speaker.
    pub speaker: String,
    pub addressees: Vec<String>,
    pub quote_type: QuoteType,
    pub referring_expression: Option<String>,
    pub mentions: MentionLists,
}

fn is_quote_mark(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{2019}')
}

impl Quote {
    pub fn start(&self) -> usize {
        self.byte_spans.first().map(|s| s.0).unwrap_or(0)
    }

    pub fn end(&self) -> usize {
        self.byte_spans.last().map(|s| s.1).unwrap_or(0)
    }

    /// Sub-spans widened by one quotation mark on either side where `text`
    /// has one, i.e. the regions that are wrapped by markers.
    pub fn regions(&self, text: &str) -> Vec<Range<usize>> {
        self.byte_spans
            .iter()
            .map(|&(s, e)| {
                let mut start = s;
                if let Some(c) = text[..s].chars().next_back() {
                    if is_quote_mark(c) {
                        start -= c.len_utf8();
                    }
                }
                let mut end = e;
                if let Some(c) = text[e..].chars().next() {
                    if is_quote_mark(c) {
                        end += c.len_utf8();
                    }
                }
                start..end
            })
            .collect()
    }

    /// Full extent (first region start .. last region end).
    pub fn extent(&self, text: &str) -> Range<usize> {
        let regions = self.regions(text);
        match (regions.first(), regions.last()) {
            (Some(a), Some(b)) => a.start..b.end,
            _ => 0..0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub heading: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NovelMetadata {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub subset: Option<SubsetTag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Novel {
    pub id: String,
    pub title: String,
    pub author: String,
    pub subset: SubsetTag,
    pub text: String,
    pub chapters: Vec<Chapter>,
    pub quotes: Vec<Quote>,
    pub characters: AliasMap,
    pub records: Vec<AnnotationRecord>,
    /// Chapter index of each quote, parallel to `quotes`.
    pub quote_chapters: Vec<usize>,
}

/// Splits `text` into chapters at heading lines. The returned ranges
/// partition the text; text before the first heading becomes an untitled
/// chapter unless it is blank.
pub fn detect_chapters(text: &str, pattern: &Regex) -> Vec<Chapter> {
    let mut starts: Vec<(usize, String)> = pattern.find_iter(text).map(|m| (m.start(), m.as_str().trim().to_string())).collect();
    match starts.first() {
        None => starts.push((0, String::new())),
        Some(&(first, _)) if first > 0 => {
            if text[..first].trim().is_empty() {
                starts[0].0 = 0;
            } else {
                starts.insert(0, (0, String::new()));
            }
        }
        _ => {}
    }
    starts
        .iter()
        .enumerate()
        .map(|(i, (start, heading))| Chapter {
            heading: heading.clone(),
            range: *start..starts.get(i + 1).map(|s| s.0).unwrap_or(text.len()),
        })
        .collect()
}

fn quote_from_record(rec: &AnnotationRecord, map: &AliasMap) -> Result<Quote, String> {
    let f = rec.fields();
    let id = f[0].trim().to_string();
    let sub = pylit::parse_str_list(&f[2]).map_err(|e| format!("{id}: subQuotationList: {e}"))?;
    let spans = pylit::parse_span_list(&f[3]).map_err(|e| format!("{id}: quoteByteSpans: {e}"))?;
    let addressees = if f[5].trim().is_empty() {
        Vec::new()
    } else {
        pylit::parse_str_list(&f[5]).map_err(|e| format!("{id}: addressees: {e}"))?
    };
    let quote_type = QuoteType::parse(&f[6]).ok_or_else(|| format!("{id}: unknown quoteType {:?}", f[6]))?;
    let speaker = map.resolve(&f[4]).ok_or_else(|| format!("{id}: speaker {:?} is not in the character list", f[4]))?.to_string();
    let referring = f[7].trim();
    Ok(Quote {
        quote_id: id,
        text: f[1].clone(),
        sub_quotations: sub,
        byte_spans: spans,
        speaker,
        addressees,
        quote_type,
        referring_expression: (!referring.is_empty()).then(|| referring.to_string()),
        mentions: MentionLists { texts: f[8].clone(), spans: f[9].clone(), entities: f[10].clone() },
    })
}

fn check_spans(q: &Quote, text: &str) -> Option<String> {
    if q.byte_spans.is_empty() {
        return Some(format!("{}: no byte spans", q.quote_id));
    }
    if q.byte_spans.len() != q.sub_quotations.len() {
        return Some(format!("{}: {} spans but {} sub-quotations", q.quote_id, q.byte_spans.len(), q.sub_quotations.len()));
    }
    let mut prev_end = 0;
    for (i, (&(s, e), sub)) in q.byte_spans.iter().zip(&q.sub_quotations).enumerate() {
        if s > e || (i > 0 && s < prev_end) {
            return Some(format!("{}: span [{s}, {e}] is not ascending/non-overlapping", q.quote_id));
        }
        prev_end = e;
        if e > text.len() || !text.is_char_boundary(s) || !text.is_char_boundary(e) {
            return Some(format!("{}: span [{s}, {e}] is outside the text or splits a character", q.quote_id));
        }
        if &text[s..e] != sub {
            return Some(format!(
                "{}: span [{s}, {e}] reads {:?}, expected {:?}",
                q.quote_id,
                truncate_for_message(&text[s..e]),
                truncate_for_message(sub)
            ));
        }
    }
    None
}

fn truncate_for_message(s: &str) -> String {
    let cut: String = s.chars().take(40).collect();
    if cut.len() < s.len() {
        format!("{cut}...")
    } else {
        cut
    }
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub heading_pattern: String,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions { heading_pattern: DEFAULT_HEADING_PATTERN.to_string() }
    }
}

impl Novel {
    /// Builds and validates a novel from in-memory sources.
    pub fn from_sources(
        id: &str,
        text: String,
        quotation_csv: &str,
        characters: &str,
        meta: NovelMetadata,
        opts: &CorpusOptions,
    ) -> Result<Novel, CorpusError> {
        let pattern = Regex::new(&opts.heading_pattern).map_err(|e| CorpusError::BadPattern(e.to_string()))?;
        let mut map = parse_character_list(characters)?;
        let records = read_records(quotation_csv)?;
        let chapters = detect_chapters(&text, &pattern);

        let mut issues = Vec::new();
        let mut quotes = Vec::with_capacity(records.len());
        let mut quote_chapters = Vec::with_capacity(records.len());
        let mut seen = std::collections::HashSet::new();
        for rec in &records {
            let q = match quote_from_record(rec, &map) {
                Ok(q) => q,
                Err(msg) => {
                    issues.push(msg);
                    continue;
                }
            };
            if !seen.insert(q.quote_id.clone()) {
                issues.push(format!("{}: duplicate quoteID", q.quote_id));
            }
            if let Some(msg) = check_spans(&q, &text) {
                issues.push(msg);
                continue;
            }
            let (s, e) = (q.start(), q.end());
            let holders: Vec<usize> =
                chapters.iter().enumerate().filter(|(_, c)| c.range.start <= s && e <= c.range.end).map(|(i, _)| i).collect();
            if holders.len() != 1 {
                issues.push(format!("{}: spans [{s}, {e}] cross a chapter boundary", q.quote_id));
                continue;
            }
            quote_chapters.push(holders[0]);
            quotes.push(q);
        }
        if !issues.is_empty() {
            return Err(CorpusError::Validation { novel: id.to_string(), issues });
        }

        // Quotes are kept in document order.
        let mut order: Vec<usize> = (0..quotes.len()).collect();
        order.sort_by_key(|&i| (quotes[i].start(), i));
        let quotes: Vec<Quote> = order.iter().map(|&i| quotes[i].clone()).collect();
        let quote_chapters: Vec<usize> = order.iter().map(|&i| quote_chapters[i]).collect();

        let mut counts: HashMap<String, usize> = HashMap::new();
        for q in &quotes {
            *counts.entry(q.speaker.clone()).or_default() += 1;
        }
        map.set_quote_counts(&counts);

        Ok(Novel {
            id: id.to_string(),
            title: meta.title.unwrap_or_else(|| id.to_string()),
            author: meta.author.unwrap_or_else(|| "Unknown".to_string()),
            subset: meta.subset.unwrap_or_default(),
            text,
            chapters,
            quotes,
            characters: map,
            records,
            quote_chapters,
        })
    }

    pub fn quote(&self, id: &str) -> Option<&Quote> {
        self.quotes.iter().find(|q| q.quote_id == id)
    }

    pub fn chapter_text(&self, index: usize) -> &str {
        &self.text[self.chapters[index].range.clone()]
    }

    /// Quotes of one chapter, in document order.
    pub fn chapter_quotes(&self, index: usize) -> Vec<&Quote> {
        self.quotes.iter().zip(&self.quote_chapters).filter(|(_, &c)| c == index).map(|(q, _)| q).collect()
    }

    pub fn character_tier(&self, id: &str) -> Result<CharacterTier, CorpusError> {
        let c = self.characters.get(id).ok_or_else(|| CorpusError::UnknownCharacter(id.to_string()))?;
        Ok(tier_for_count(c.quote_count))
    }

    pub fn tier_counts(&self) -> (usize, usize) {
        let major = self
            .characters
            .characters()
            .iter()
            .filter(|c| tier_for_count(c.quote_count) == CharacterTier::MajorOrIntermediate)
            .count();
        (major, self.characters.len() - major)
    }
}

pub fn tier_for_count(count: usize) -> CharacterTier {
    if count >= MAJOR_CHARACTER_MIN_QUOTES {
        CharacterTier::MajorOrIntermediate
    } else {
        CharacterTier::Minor
    }
}

/// Convenience wrapper over [`Novel::character_tier`].
pub fn character_tier(novel: &Novel, id: &str) -> Result<CharacterTier, CorpusError> {
    novel.character_tier(id)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Loads one novel directory. The directory name is the novel id.
pub fn load_novel_dir(dir: &Path, opts: &CorpusOptions) -> Result<Novel, CorpusError> {
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "novel".to_string());
    let text = read(&dir.join("novel.txt"))?;
    let quotes = read(&dir.join("quotation_info.csv"))?;
    let chars_path = [dir.join("characters.csv"), dir.join("characters.txt")]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| dir.join("characters.csv"));
    let characters = read(&chars_path)?;
    let meta_path = dir.join("metadata.json");
    let meta = if meta_path.exists() {
        serde_json::from_str(&read(&meta_path)?)
            .map_err(|e| CorpusError::Malformed { what: "metadata.json", detail: e.to_string() })?
    } else {
        NovelMetadata::default()
    };
    Novel::from_sources(&id, text, &quotes, &characters, meta, opts)
}

/// Lists novel directories (those holding a `novel.txt`) under `root`, sorted by name.
pub fn discover_novels(root: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let entries = std::fs::read_dir(root).map_err(|source| CorpusError::Io { path: root.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir() && p.join("novel.txt").exists()).collect();
    dirs.sort();
    Ok(dirs)
}

//! Token windows over chapters, quote markers and chunk-to-chunk overlap.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Novel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("window ({window}) must exceed overlap ({overlap}) and overlap must be positive")]
    BadWindow { window: usize, overlap: usize },
    #[error("quote {quote_id} spans {tokens} tokens, more than the {window}-token window")]
    QuoteTooLong { quote_id: String, tokens: usize, window: usize },
}

/// Model-defined token accounting.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
    /// Longest prefix of `text` holding at most `max_tokens` tokens.
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str;
}

/// Whitespace words times 1.3, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCounter;

impl WordCounter {
    fn tokens_for_words(words: usize) -> usize {
        (13 * words).div_ceil(10)
    }
}

impl TokenCounter for WordCounter {
    fn count(&self, text: &str) -> usize {
        Self::tokens_for_words(text.split_whitespace().count())
    }

    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        // ceil(1.3 w) <= max  <=>  w <= 10 max / 13
        let max_words = (10 * max_tokens) / 13;
        // The prefix runs up to the start of word `max_words + 1`.
        let mut words = 0;
        let mut in_word = false;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                in_word = false;
            } else if !in_word {
                in_word = true;
                if words == max_words {
                    return &text[..i];
                }
                words += 1;
            }
        }
        text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub window: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig { window: 4096, overlap: 1024 }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.overlap == 0 || self.window <= self.overlap {
            return Err(ChunkError::BadWindow { window: self.window, overlap: self.overlap });
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.window - self.overlap
    }
}

/// A quote's marker regions relative to some text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteRegions {
    pub quote_id: String,
    pub regions: Vec<Range<usize>>,
}

impl QuoteRegions {
    fn extent(&self) -> Range<usize> {
        self.regions.first().map(|r| r.start).unwrap_or(0)..self.regions.last().map(|r| r.end).unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct ChapterInput<'a> {
    pub index: usize,
    pub text: &'a str,
    /// Quotes in document order, regions relative to `text`.
    pub quotes: Vec<QuoteRegions>,
}

impl<'a> ChapterInput<'a> {
    pub fn from_novel(novel: &'a Novel, index: usize) -> ChapterInput<'a> {
        let base = novel.chapters[index].range.start;
        let quotes = novel
            .chapter_quotes(index)
            .into_iter()
            .map(|q| QuoteRegions {
                quote_id: q.quote_id.clone(),
                regions: q.regions(&novel.text).into_iter().map(|r| r.start - base..r.end - base).collect(),
            })
            .collect();
        ChapterInput { index, text: novel.chapter_text(index), quotes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chapter_index: usize,
    /// Nominal token window before snapping.
    pub window: (usize, usize),
    /// Byte range within the chapter after snapping.
    pub byte_range: Range<usize>,
    pub text: String,
    /// `(local id, global quote id)`, local ids 1..=n in document order.
    pub quotes: Vec<(usize, String)>,
    /// Marker regions per quote, parallel to `quotes`, relative to `text`.
    pub quote_regions: Vec<Vec<Range<usize>>>,
    pub marked_text: String,
    pub overlap_with_prev: BTreeSet<String>,
}

impl Chunk {
    pub fn global_id(&self, local: usize) -> Option<&str> {
        self.quotes.iter().find(|(l, _)| *l == local).map(|(_, g)| g.as_str())
    }

    pub fn local_id(&self, global: &str) -> Option<usize> {
        self.quotes.iter().find(|(_, g)| g == global).map(|(l, _)| *l)
    }
}

/// Splits one chapter into token windows.
///
/// Chapters that fit in `cfg.window` tokens give a single chunk. Longer
/// chapters get windows starting every `window - overlap` tokens; each
/// boundary that lands inside a quote is pushed outward to the quote edge.
pub fn chunk_chapter(chapter: &ChapterInput<'_>, counter: &dyn TokenCounter, cfg: ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    cfg.validate()?;
    let text = chapter.text;
    for q in &chapter.quotes {
        let tokens = counter.count(&text[q.extent()]);
        if tokens > cfg.window {
            return Err(ChunkError::QuoteTooLong { quote_id: q.quote_id.clone(), tokens, window: cfg.window });
        }
    }

    let total = counter.count(text);
    let mut windows: Vec<((usize, usize), Range<usize>)> = Vec::new();
    if total <= cfg.window {
        windows.push(((0, total), 0..text.len()));
    } else {
        let mut start = 0;
        loop {
            let end = (start + cfg.window).min(total);
            let b_start = counter.truncate(text, start).len();
            let b_end = if end == total { text.len() } else { counter.truncate(text, end).len() };
            windows.push(((start, end), snap(b_start..b_end, &chapter.quotes)));
            if end == total {
                break;
            }
            start += cfg.step();
        }
    }

    let mut chunks: Vec<Chunk> = Vec::with_capacity(windows.len());
    for (window, range) in windows {
        let mut quotes = Vec::new();
        let mut regions = Vec::new();
        for q in &chapter.quotes {
            let e = q.extent();
            if e.start < range.end && range.start < e.end {
                quotes.push((quotes.len() + 1, q.quote_id.clone()));
                regions.push(q.regions.iter().map(|r| r.start - range.start..r.end - range.start).collect());
            }
        }
        let overlap_with_prev = match chunks.last() {
            Some(prev) => {
                let before: BTreeSet<&String> = prev.quotes.iter().map(|(_, g)| g).collect();
                quotes.iter().filter(|(_, g)| before.contains(g)).map(|(_, g)| g.clone()).collect()
            }
            None => BTreeSet::new(),
        };
        let mut chunk = Chunk {
            chapter_index: chapter.index,
            window,
            text: text[range.clone()].to_string(),
            byte_range: range,
            quotes,
            quote_regions: regions,
            marked_text: String::new(),
            overlap_with_prev,
        };
        chunk.marked_text = mark_quotes(&chunk).0;
        chunks.push(chunk);
    }
    Ok(chunks)
}

fn snap(mut range: Range<usize>, quotes: &[QuoteRegions]) -> Range<usize> {
    loop {
        let mut changed = false;
        for q in quotes {
            let e = q.extent();
            if e.start < range.start && range.start < e.end {
                range.start = e.start;
                changed = true;
            }
            if e.start < range.end && range.end < e.end {
                range.end = e.end;
                changed = true;
            }
        }
        if !changed {
            return range;
        }
    }
}

/// Chunks every chapter of a novel, in order.
pub fn chunk_novel(novel: &Novel, counter: &dyn TokenCounter, cfg: ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    let mut all = Vec::new();
    for i in 0..novel.chapters.len() {
        all.extend(chunk_chapter(&ChapterInput::from_novel(novel, i), counter, cfg)?);
    }
    Ok(all)
}

/// Wraps every quote region as `|i|...|i|`. Returns the marked text and the
/// local-to-global id map.
pub fn mark_quotes(chunk: &Chunk) -> (String, BTreeMap<usize, String>) {
    let mut inserts: Vec<(usize, usize, bool)> = Vec::new();
    for ((local, _), regions) in chunk.quotes.iter().zip(&chunk.quote_regions) {
        for r in regions {
            inserts.push((r.start, *local, true));
            inserts.push((r.end, *local, false));
        }
    }
    // Closing markers sort before opening ones at the same offset.
    inserts.sort_by_key(|&(at, _, open)| (at, open));
    let mut out = String::with_capacity(chunk.text.len() + inserts.len() * 4);
    let mut pos = 0;
    for (at, local, _) in inserts {
        out.push_str(&chunk.text[pos..at]);
        out.push('|');
        out.push_str(&local.to_string());
        out.push('|');
        pos = at;
    }
    out.push_str(&chunk.text[pos..]);
    let map = chunk.quotes.iter().cloned().collect();
    (out, map)
}

/// Removes `|digits|` markers.
pub fn strip_markers(marked: &str) -> String {
    let bytes = marked.as_bytes();
    let mut out = String::with_capacity(marked.len());
    let mut i = 0;
    let mut run_start = 0;
    while i < bytes.len() {
        if bytes[i] == b'|' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'|' {
                out.push_str(&marked[run_start..i]);
                i = j + 1;
                run_start = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&marked[run_start..]);
    out
}

/// Earlier predictions for the quotes this chunk shares with the previous
/// one, keyed by local id. Overlap quotes without a prediction are left out.
pub fn carryover(previous: &HashMap<String, String>, chunk: &Chunk) -> BTreeMap<usize, String> {
    let mut out = BTreeMap::new();
    for (local, global) in &chunk.quotes {
        if !chunk.overlap_with_prev.contains(global) {
            continue;
        }
        match previous.get(global) {
            Some(name) => {
                out.insert(*local, name.clone());
            }
            None => log::warn!("overlap quote {global} has no earlier prediction; omitted from carryover"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fixed one-token-per-word counter for arithmetic checks.
    struct PerWord;
    impl TokenCounter for PerWord {
        fn count(&self, text: &str) -> usize {
            text.split_whitespace().count()
        }
        fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
            let mut words = 0;
            let mut in_word = false;
            for (i, c) in text.char_indices() {
                if c.is_whitespace() {
                    in_word = false;
                } else if !in_word {
                    if words == max_tokens {
                        return &text[..i];
                    }
                    in_word = true;
                    words += 1;
                }
            }
            text
        }
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn word_counter_basics() {
        let c = WordCounter;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("one"), 2);
        assert_eq!(c.count("a b c d e f g h i j"), 13);
        let t = words(100);
        for max in [0, 1, 2, 3, 13, 50, 130, 500] {
            let p = c.truncate(&t, max);
            assert!(c.count(p) <= max, "max {max}");
            assert!(t.starts_with(p));
        }
        assert_eq!(c.truncate(&t, 500), t);
    }

    #[test]
    fn short_chapter_is_one_chunk() {
        let text = words(1000);
        let ch = ChapterInput { index: 0, text: &text, quotes: vec![] };
        let chunks = chunk_chapter(&ch, &PerWord, ChunkConfig::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].byte_range, 0..text.len());
    }

    #[test]
    fn exact_window_is_one_chunk() {
        let text = words(4096);
        let ch = ChapterInput { index: 0, text: &text, quotes: vec![] };
        assert_eq!(chunk_chapter(&ch, &PerWord, ChunkConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn long_chapter_window_starts() {
        let text = words(5000);
        let ch = ChapterInput { index: 0, text: &text, quotes: vec![] };
        let chunks = chunk_chapter(&ch, &PerWord, ChunkConfig::default()).unwrap();
        let starts: Vec<usize> = chunks.iter().map(|c| c.window.0).collect();
        // start_k = k * (4096 - 1024)
        assert_eq!(starts, vec![0, 3072]);
        assert_eq!(chunks[1].window.1, 5000);
        assert!(chunks[1].text.starts_with("w3072 "));
    }

    #[test]
    fn bad_window() {
        let ch = ChapterInput { index: 0, text: "x", quotes: vec![] };
        assert!(chunk_chapter(&ch, &PerWord, ChunkConfig { window: 10, overlap: 10 }).is_err());
        assert!(chunk_chapter(&ch, &PerWord, ChunkConfig { window: 10, overlap: 0 }).is_err());
    }

    fn quoted_chapter() -> (String, Vec<QuoteRegions>) {
        // w0 .. w9 "a b c" w13 .. "d e" ...
        let mut text = String::new();
        let mut quotes = Vec::new();
        for i in 0..40 {
            if i % 10 == 5 {
                let start = text.len();
                text.push_str("\"x y z\" ");
                quotes.push(QuoteRegions { quote_id: format!("Q{i}"), regions: vec![start..start + 7] });
            } else {
                text.push_str(&format!("w{i} "));
            }
        }
        (text, quotes)
    }

    #[test]
    fn boundaries_snap_outward() {
        let (text, quotes) = quoted_chapter();
        let ch = ChapterInput { index: 0, text: &text, quotes };
        let chunks = chunk_chapter(&ch, &PerWord, ChunkConfig { window: 16, overlap: 4 }).unwrap();
        for c in &chunks {
            for q in &ch.quotes {
                let e = q.extent();
                let inside = e.start >= c.byte_range.start && e.end <= c.byte_range.end;
                let outside = e.end <= c.byte_range.start || e.start >= c.byte_range.end;
                assert!(inside || outside, "quote {} bisected by {:?}", q.quote_id, c.byte_range);
            }
        }
    }

    #[test]
    fn quote_longer_than_window() {
        let text = format!("\"{}\"", words(50));
        let q = QuoteRegions { quote_id: "Q9".into(), regions: vec![0..text.len()] };
        let ch = ChapterInput { index: 0, text: &text, quotes: vec![q] };
        let err = chunk_chapter(&ch, &PerWord, ChunkConfig { window: 20, overlap: 5 }).unwrap_err();
        assert!(matches!(err, ChunkError::QuoteTooLong { ref quote_id, .. } if quote_id == "Q9"));
    }

    #[test]
    fn marking_first_quote() {
        let text = "and |x \"That was in the year six;\" \"That happened,\" he said.";
        let a = text.find('"').unwrap();
        let b = text[a + 1..].find('"').unwrap() + a + 2;
        let c = text[b..].find('"').unwrap() + b;
        let d = text[c + 1..].find('"').unwrap() + c + 2;
        let chunk = Chunk {
            chapter_index: 0,
            window: (0, 10),
            byte_range: 0..text.len(),
            text: text.into(),
            quotes: vec![(1, "Q0".into()), (2, "Q1".into())],
            quote_regions: vec![vec![a..b], vec![c..d]],
            marked_text: String::new(),
            overlap_with_prev: BTreeSet::new(),
        };
        let (marked, map) = mark_quotes(&chunk);
        assert!(marked.contains("|1|\"That was in the year six;\"|1| |2|\"That happened,\"|2|"));
        assert_eq!(map[&1], "Q0");
        assert_eq!(strip_markers(&marked), text);
    }

    #[test]
    fn zero_quote_chunk_marks_nothing() {
        let text = words(10);
        let ch = ChapterInput { index: 0, text: &text, quotes: vec![] };
        let c = &chunk_chapter(&ch, &PerWord, ChunkConfig::default()).unwrap()[0];
        assert_eq!(c.marked_text, c.text);
    }

    #[test]
    fn carryover_rules() {
        let (text, quotes) = quoted_chapter();
        let ch = ChapterInput { index: 0, text: &text, quotes };
        let chunks = chunk_chapter(&ch, &PerWord, ChunkConfig { window: 20, overlap: 10 }).unwrap();
        let second = chunks.iter().find(|c| !c.overlap_with_prev.is_empty()).expect("some overlap");
        let mut prev = HashMap::new();
        let g = second.overlap_with_prev.iter().next().unwrap().clone();
        let local = second.local_id(&g).unwrap();
        prev.insert(g.clone(), "Anne".to_string());
        let co = carryover(&prev, second);
        assert_eq!(co.get(&local).map(String::as_str), Some("Anne"));
        assert_eq!(co.len(), 1);
        assert!(carryover(&HashMap::new(), second).is_empty());
        assert!(carryover(&prev, &chunks[0]).is_empty());
    }

    proptest! {
        #[test]
        fn chunk_invariants(n_words in 10usize..400, quote_every in 3usize..12, window in 12usize..80, overlap_frac in 1usize..9) {
            let overlap = (window * overlap_frac / 10).max(1);
            prop_assume!(overlap < window);
            let mut text = String::new();
            let mut quotes = Vec::new();
            for i in 0..n_words {
                if i % quote_every == 0 {
                    let s = text.len();
                    text.push_str(&format!("\"q{i} said\" "));
                    quotes.push(QuoteRegions { quote_id: format!("Q{i}"), regions: vec![s..text.len() - 1] });
                } else {
                    text.push_str(&format!("w{i} "));
                }
            }
            let ch = ChapterInput { index: 0, text: &text, quotes };
            let chunks = chunk_chapter(&ch, &WordCounter, ChunkConfig { window, overlap }).unwrap();
            let mut seen = BTreeSet::new();
            for (k, c) in chunks.iter().enumerate() {
                let locals: Vec<usize> = c.quotes.iter().map(|(l, _)| *l).collect();
                prop_assert_eq!(locals, (1..=c.quotes.len()).collect::<Vec<_>>());
                prop_assert_eq!(strip_markers(&c.marked_text), c.text.clone());
                let expected: BTreeSet<String> = if k == 0 { BTreeSet::new() } else {
                    let prev: BTreeSet<&String> = chunks[k - 1].quotes.iter().map(|(_, g)| g).collect();
                    c.quotes.iter().map(|(_, g)| g).filter(|g| prev.contains(g)).cloned().collect()
                };
                prop_assert_eq!(&c.overlap_with_prev, &expected);
                seen.extend(c.quotes.iter().map(|(_, g)| g.clone()));
            }
            prop_assert_eq!(seen.len(), ch.quotes.len());
        }
    }
}

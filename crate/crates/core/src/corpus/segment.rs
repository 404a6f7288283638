//! Rule-based sentence segmentation.
//!
//! A sentence ends at `.`, `!` or `?` (plus any closing quotes or brackets)
//! when followed by whitespace and then an uppercase letter or an opening
//! quote. Blank lines always end a sentence. Periods after honorifics,
//! common abbreviations and single-letter initials never split, and nothing
//! splits while a quotation is open.

use std::ops::Range;

const ABBREVIATIONS: &[&str] = &[
    "Mr", "Mrs", "Ms", "Miss", "Dr", "St", "Mt", "Jr", "Sr", "Prof", "Rev", "Capt", "Col", "Gen", "Lt", "Sgt", "Hon", "Messrs",
    "Mme", "Mlle", "Esq", "Gov", "Rep", "Sen", "Fr", "No", "vs", "etc", "viz", "cf", "ie", "eg", "i.e", "e.g",
];

fn is_open_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201C}' | '\u{2018}' | '\'')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\u{201D}' | '\u{2019}' | '\'' | ')' | ']')
}

/// Tracks whether a double-quoted span is open. Single quotes are ignored
/// since they double as apostrophes.
#[derive(Clone, Copy)]
struct QuoteState {
    open: bool,
}

impl QuoteState {
    fn feed(&mut self, c: char) {
        match c {
            '"' => self.open = !self.open,
            '\u{201C}' => self.open = true,
            '\u{201D}' => self.open = false,
            _ => {}
        }
    }
}

fn preceding_word(text: &str, end: usize) -> &str {
    let start = text[..end]
        .char_indices()
        .rev()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '.'))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    &text[start..end]
}

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches('.');
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Returns byte ranges that partition `text` into sentences.
pub fn segment_sentences(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut quote = QuoteState { open: false };
    let mut i = 0usize;
    let at = |k: usize| chars.get(k).map(|&(_, c)| c);
    let offset = |k: usize| chars.get(k).map(|&(o, _)| o).unwrap_or(text.len());

    while i < chars.len() {
        let c = chars[i].1;

        // Paragraph break: newline, optional spaces, newline.
        if c == '\n' {
            let mut k = i + 1;
            while matches!(at(k), Some(' ' | '\t' | '\r')) {
                k += 1;
            }
            if at(k) == Some('\n') {
                while matches!(at(k), Some(w) if w.is_whitespace()) {
                    k += 1;
                }
                quote.open = false;
                if k < chars.len() && offset(k) > start {
                    spans.push(start..offset(k));
                    start = offset(k);
                }
                i = k;
                continue;
            }
        }

        quote.feed(c);
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }

        let term_at = i;
        let mut k = i + 1;
        let mut state = quote;
        while let Some(n) = at(k) {
            if matches!(n, '.' | '!' | '?') {
                k += 1;
            } else if is_closer(n) {
                state.feed(n);
                k += 1;
            } else {
                break;
            }
        }
        let ws_start = k;
        while matches!(at(k), Some(w) if w.is_whitespace()) {
            k += 1;
        }
        let has_ws = k > ws_start;
        let next_ok = matches!(at(k), Some(n) if n.is_uppercase() || is_open_quote(n));
        let abbrev = c == '.' && ws_start == term_at + 1 && is_abbreviation(preceding_word(text, offset(term_at)));
        if has_ws && next_ok && !state.open && !abbrev && k < chars.len() {
            spans.push(start..offset(k));
            start = offset(k);
        }
        quote = state;
        i = k.max(i + 1);
    }
    if start < text.len() {
        spans.push(start..text.len());
    }
    spans
}

/// Index of the sentence containing byte `pos`.
pub fn sentence_index(spans: &[Range<usize>], pos: usize) -> Option<usize> {
    let idx = spans.partition_point(|s| s.end <= pos);
    (idx < spans.len() && spans[idx].contains(&pos)).then_some(idx)
}

use std::collections::BTreeMap;

/// Result of reading an attribution answer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributionParse {
    pub predictions: BTreeMap<usize, String>,
    /// Set when the response holds no balanced `{...}` region at all.
    pub failed: bool,
}

fn is_quote(b: u8) -> bool {
    b == b'\'' || b == b'"'
}

/// Position just past the closing quote of a string opening at `start`.
///
/// A quote character only closes the string when it is followed (after
/// optional whitespace) by `:`, `,` or `}`, so apostrophes inside names
/// like `O'Hara` survive. Backslash escapes the next byte.
fn string_end(b: &[u8], start: usize) -> Option<usize> {
    let q = b[start];
    let mut i = start + 1;
    while i < b.len() {
        if b[i] == b'\\' {
            i += 2;
            continue;
        }
        if b[i] == q {
            let mut j = i + 1;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            if j >= b.len() || matches!(b[j], b':' | b',' | b'}') {
                return Some(i + 1);
            }
        }
        i += 1;
    }
    None
}

fn balanced_region(s: &str) -> Option<(usize, usize)> {
    let b = s.as_bytes();
    let mut search = 0;
    while let Some(off) = s[search..].find('{') {
        let open = search + off;
        let mut depth = 0usize;
        let mut i = open;
        let mut closed = None;
        while i < b.len() {
            match b[i] {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        closed = Some(i);
                        break;
                    }
                }
                q if is_quote(q) => {
                    if let Some(end) = string_end(b, i) {
                        i = end;
                        continue;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        if let Some(close) = closed {
            return Some((open, close));
        }
        search = open + 1;
    }
    None
}

fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Reads one key or value: a quoted string or a bare token up to the next
/// delimiter. Returns the text, whether it was quoted, and the next position.
fn read_atom(s: &str, mut i: usize, delims: &[u8]) -> Option<(String, bool, usize)> {
    let b = s.as_bytes();
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    if i >= b.len() {
        return None;
    }
    if is_quote(b[i]) {
        let end = string_end(b, i)?;
        return Some((unescape(&s[i + 1..end - 1]), true, end));
    }
    let start = i;
    while i < b.len() && !delims.contains(&b[i]) {
        i += 1;
    }
    Some((s[start..i].trim().to_string(), false, i))
}

/// Extracts quote-id → speaker pairs from the first balanced `{...}` region.
///
/// Single or double quotes are accepted. Keys that are not integers are
/// dropped with a warning; parsing stops at the first malformed entry,
/// keeping what was read so far.
pub fn parse_attribution_json(response: &str) -> AttributionParse {
    let Some((open, close)) = balanced_region(response) else {
        return AttributionParse { predictions: BTreeMap::new(), failed: true };
    };
    let body = &response[..close];
    let b = body.as_bytes();
    let mut out = BTreeMap::new();
    let mut i = open + 1;
    loop {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b',') {
            i += 1;
        }
        if i >= b.len() {
            break;
        }
        let Some((key, _, next)) = read_atom(body, i, b":,") else { break };
        i = next;
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= b.len() || b[i] != b':' {
            log::warn!("attribution answer: entry {key:?} has no value; stopped reading");
            break;
        }
        let Some((value, quoted, next)) = read_atom(body, i + 1, b",") else { break };
        i = next;
        if !quoted && value.eq_ignore_ascii_case("null") {
            continue;
        }
        match key.trim().parse::<usize>() {
            Ok(id) => {
                out.insert(id, value.trim().to_string());
            }
            Err(_) => log::warn!("attribution answer: dropped non-integer key {key:?}"),
        }
    }
    AttributionParse { predictions: out, failed: false }
}

/// Trimmed content of the first `<speaker>...</speaker>` region. The
/// backslash closing form `<\speaker>` is accepted too.
pub fn parse_speaker_tag(response: &str) -> Option<String> {
    let lower = response.to_ascii_lowercase();
    let open = lower.find("<speaker>")?;
    let from = open + "<speaker>".len();
    let close = ["</speaker>", "<\\speaker>"].iter().filter_map(|t| lower[from..].find(t)).min()?;
    let name = response[from..from + close].trim();
    (!name.is_empty()).then(|| name.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(pairs: &[(usize, &str)]) -> BTreeMap<usize, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn single_quoted_answer() {
        let p = parse_attribution_json("{ '1': 'Anne Elliot', '2': 'Captain Wentworth' }");
        assert!(!p.failed);
        assert_eq!(p.predictions, map(&[(1, "Anne Elliot"), (2, "Captain Wentworth")]));
    }

    #[test]
    fn embedded_in_prose() {
        let r = "Sure! Here are the speakers:\n{\"3\": \"Mary\", \"4\": \"Louisa\"}\nHope this helps {}";
        assert_eq!(parse_attribution_json(r).predictions, map(&[(3, "Mary"), (4, "Louisa")]));
    }

    #[test]
    fn no_braces_flags_failure() {
        let p = parse_attribution_json("I cannot determine the speakers.");
        assert!(p.failed);
        assert!(p.predictions.is_empty());
        assert!(parse_attribution_json("{ '1': 'A'").failed);
    }

    #[test]
    fn apostrophes_and_bare_keys() {
        let p = parse_attribution_json("{1: 'O'Hara', '2' : 'Mrs Smith' , 'x': 'Bob', 3: null}");
        assert_eq!(p.predictions, map(&[(1, "O'Hara"), (2, "Mrs Smith")]));
        let p = parse_attribution_json(r"{ '5': 'O\'Brien' }");
        assert_eq!(p.predictions, map(&[(5, "O'Brien")]));
    }

    #[test]
    fn brace_inside_string_does_not_close() {
        let p = parse_attribution_json("{'1': 'a}b', '2': 'C'}");
        assert_eq!(p.predictions, map(&[(1, "a}b"), (2, "C")]));
    }

    #[test]
    fn partial_map_on_malformed_tail() {
        let p = parse_attribution_json("{'1': 'A', '2' 'B'}");
        assert!(!p.failed);
        assert_eq!(p.predictions, map(&[(1, "A")]));
    }

    #[test]
    fn speaker_tags() {
        assert_eq!(parse_speaker_tag("<speaker>Emma</speaker>").as_deref(), Some("Emma"));
        assert_eq!(parse_speaker_tag("I think <speaker> Mrs Smith </speaker>.").as_deref(), Some("Mrs Smith"));
        assert_eq!(parse_speaker_tag("<speaker>Anne<\\speaker>").as_deref(), Some("Anne"));
        assert_eq!(parse_speaker_tag("Emma"), None);
        assert_eq!(parse_speaker_tag("<speaker>Emma"), None);
        assert_eq!(parse_speaker_tag("<speaker>  </speaker>"), None);
        assert_eq!(parse_speaker_tag("<speaker>A</speaker> <speaker>B</speaker>").as_deref(), Some("A"));
    }

    proptest! {
        #[test]
        fn parsers_are_total(s in ".{0,200}") {
            let _ = parse_attribution_json(&s);
            let _ = parse_speaker_tag(&s);
        }

        #[test]
        fn parsers_are_total_on_structured_noise(s in "[{}'\":, 0-9a-z\\\\<>/]{0,80}") {
            let _ = parse_attribution_json(&s);
            let _ = parse_speaker_tag(&s);
        }
    }
}

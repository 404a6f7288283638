//! Prompt rendering for attribution, incremental attribution, the two
//! speaker-guessing probes and name cloze.
//!
//! Templates are plain text files with `{{slot}}` placeholders. The
//! built-in set is compiled in from `templates/`; a directory holding any
//! of the same file names overrides individual templates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AliasMap;

pub const MASK: &str = "[MASK]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("passage has no quote markers")]
    NoMarkers,
    #[error("previous predictions are empty; use the plain attribution prompt")]
    EmptyPrevious,
    #[error("alias map is empty")]
    EmptyAliasMap,
    #[error("cloze item has no masked referring expression")]
    MissingReferringExpression,
    #[error("passage must contain exactly one {MASK}, found {0}")]
    MaskCount(usize),
    #[error("template slot {{{{{0}}}}} was not filled")]
    UnfilledSlot(String),
    #[error("template {name}: {detail}")]
    Template { name: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptFamily {
    Attribution,
    IncrementalAttribution,
    CsgCloze,
    CsgSpeaker,
    NameCloze,
}

impl PromptFamily {
    pub const ALL: [PromptFamily; 5] = [
        PromptFamily::Attribution,
        PromptFamily::IncrementalAttribution,
        PromptFamily::CsgCloze,
        PromptFamily::CsgSpeaker,
        PromptFamily::NameCloze,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            PromptFamily::Attribution => "attribution.txt",
            PromptFamily::IncrementalAttribution => "incremental.txt",
            PromptFamily::CsgCloze => "csg_cloze.txt",
            PromptFamily::CsgSpeaker => "csg_speaker.txt",
            PromptFamily::NameCloze => "name_cloze.txt",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            PromptFamily::Attribution => include_str!("../templates/attribution.txt"),
            PromptFamily::IncrementalAttribution => include_str!("../templates/incremental.txt"),
            PromptFamily::CsgCloze => include_str!("../templates/csg_cloze.txt"),
            PromptFamily::CsgSpeaker => include_str!("../templates/csg_speaker.txt"),
            PromptFamily::NameCloze => include_str!("../templates/name_cloze.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

/// A parsed template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub family: PromptFamily,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn parse(family: PromptFamily, source: &str) -> Result<PromptTemplate, PromptError> {
        let source = source.strip_suffix('\n').unwrap_or(source);
        let mut segments = Vec::new();
        let mut rest = source;
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                segments.push(Segment::Literal(rest[..open].to_string()));
            }
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| PromptError::Template { name: family.file_name().into(), detail: "unterminated {{".into() })?;
            let name = after[..close].trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(PromptError::Template { name: family.file_name().into(), detail: format!("bad slot name {name:?}") });
            }
            segments.push(Segment::Slot(name.to_string()));
            rest = &after[close + 2..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(PromptTemplate { family, segments })
    }

    pub fn slots(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Single-pass substitution: slot values are inserted verbatim and never
    /// rescanned.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => {
                    let v = values.iter().find(|(k, _)| k == name).ok_or_else(|| PromptError::UnfilledSlot(name.clone()))?;
                    out.push_str(v.1);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    templates: BTreeMap<&'static str, PromptTemplate>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let templates = PromptFamily::ALL
            .iter()
            .map(|f| (f.file_name(), PromptTemplate::parse(*f, f.builtin()).expect("built-in template parses")))
            .collect();
        PromptTemplates { templates }
    }
}

/// Inputs for a speaker-guessing prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsgPromptInput {
    pub cloze: bool,
    pub title: String,
    pub author: String,
    pub corrupted_passage: String,
    pub target_quote: String,
    pub referring_expression: Option<String>,
}

impl PromptTemplates {
    /// Built-in templates, overridden by any matching file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<PromptTemplates, PromptError> {
        let mut t = PromptTemplates::default();
        for family in PromptFamily::ALL {
            let path = dir.join(family.file_name());
            if path.exists() {
                let src = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Template { name: family.file_name().into(), detail: e.to_string() })?;
                t.templates.insert(family.file_name(), PromptTemplate::parse(family, &src)?);
            }
        }
        Ok(t)
    }

    pub fn get(&self, family: PromptFamily) -> &PromptTemplate {
        &self.templates[family.file_name()]
    }

    pub fn attribution(&self, marked_text: &str, alias_block: &str) -> Result<String, PromptError> {
        if count_markers(marked_text) == 0 {
            return Err(PromptError::NoMarkers);
        }
        self.get(PromptFamily::Attribution).render(&[("passage", marked_text), ("alias_block", alias_block)])
    }

    pub fn incremental(
        &self,
        marked_text: &str,
        alias_block: &str,
        previous: &BTreeMap<usize, String>,
    ) -> Result<String, PromptError> {
        if count_markers(marked_text) == 0 {
            return Err(PromptError::NoMarkers);
        }
        if previous.is_empty() {
            return Err(PromptError::EmptyPrevious);
        }
        let prev = format_previous_predictions(previous);
        self.get(PromptFamily::IncrementalAttribution).render(&[
            ("passage", marked_text),
            ("previous", &prev),
            ("alias_block", alias_block),
        ])
    }

    pub fn csg(&self, item: &CsgPromptInput) -> Result<String, PromptError> {
        let family = if item.cloze {
            if item.referring_expression.as_deref().is_none_or(|r| r.trim().is_empty()) {
                return Err(PromptError::MissingReferringExpression);
            }
            let masks = item.corrupted_passage.matches(MASK).count();
            if masks != 1 {
                return Err(PromptError::MaskCount(masks));
            }
            PromptFamily::CsgCloze
        } else {
            PromptFamily::CsgSpeaker
        };
        self.get(family).render(&[
            ("title", &item.title),
            ("author", &item.author),
            ("passage", &item.corrupted_passage),
            ("target_quote", &item.target_quote),
        ])
    }

    pub fn name_cloze(&self, passage: &str) -> Result<String, PromptError> {
        let masks = passage.matches(MASK).count();
        if masks != 1 {
            return Err(PromptError::MaskCount(masks));
        }
        self.get(PromptFamily::NameCloze).render(&[("passage", passage)])
    }
}

/// `Canonical=Alias1=...` per character, sorted by canonical id, fenced by `---`.
pub fn format_alias_block(map: &AliasMap) -> Result<String, PromptError> {
    if map.is_empty() {
        return Err(PromptError::EmptyAliasMap);
    }
    let mut lines: Vec<String> = map.characters().iter().map(|c| c.aliases.join("=")).collect();
    lines.sort();
    Ok(format!("---\n{}\n---", lines.join("\n")))
}

fn quote_single(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

/// `{ '2': 'A', '4': 'B' }`
pub fn format_previous_predictions(previous: &BTreeMap<usize, String>) -> String {
    let body: Vec<String> =
        previous.iter().map(|(k, v)| format!("{}: {}", quote_single(&k.to_string()), quote_single(v))).collect();
    format!("{{ {} }}", body.join(", "))
}

fn count_markers(text: &str) -> usize {
    let b = text.as_bytes();
    let mut n = 0;
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'|' {
            let mut j = i + 1;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && j < b.len() && b[j] == b'|' {
                n += 1;
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    n
}

pub fn build_attribution_prompt(marked_text: &str, alias_block: &str) -> Result<String, PromptError> {
    PromptTemplates::default().attribution(marked_text, alias_block)
}

pub fn build_incremental_prompt(
    marked_text: &str,
    alias_block: &str,
    previous: &BTreeMap<usize, String>,
) -> Result<String, PromptError> {
    PromptTemplates::default().incremental(marked_text, alias_block, previous)
}

pub fn build_csg_prompt(item: &CsgPromptInput) -> Result<String, PromptError> {
    PromptTemplates::default().csg(item)
}

pub fn build_name_cloze_prompt(passage_with_single_mask: &str) -> Result<String, PromptError> {
    PromptTemplates::default().name_cloze(passage_with_single_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_character_list;

    const PERSUASION: &str = "\
Admiral Croft=The Admiral=Admiral
Anne Elliot=Miss Anne=Miss Anne Elliot=Anne
Captain Harville=Harville
Captain Wentworth=Wentworth=Frederick Wentworth=Frederick
Charles Hayter=Hayter
Charles Musgrove
Elizabeth
Henrietta Musgrove=Henrietta
Lady Dalrymple=Dalrymple
Lady Russell=Russell
Louisa Musgrove=Louisa
Mary Musgrove=Mary
Mr Shepherd=Shepherd=John Shepherd
Mrs Clay=Clay=Penelope
Mrs Musgrove=Musgrove
Mrs Smith=Hamilton=Smith=Miss Hamilton
Sir Walter Elliot=Walter Elliot=Sir Walter=Walter
Sophia Croft=Sister Of Captian Wentworth=Croft=Mrs Croft
The Waiter=Waiter
William Walter Elliot=William=Mr Elliot=Elliot
";

    fn alias_block() -> String {
        // Shuffle the input order to check the sort.
        let mut lines: Vec<&str> = PERSUASION.lines().collect();
        lines.reverse();
        format_alias_block(&parse_character_list(&lines.join("\n")).unwrap()).unwrap()
    }

    fn residue_free(p: &str) {
        assert!(!p.contains("{{"), "placeholder residue");
        let mut rest = p;
        while let Some(i) = rest.find('[') {
            let tail = &rest[i..];
            assert!(
                tail.starts_with("[MASK]") || tail.starts_with("[SPEAKER]"),
                "unexpected bracket slot near {:?}",
                &tail[..tail.len().min(20)]
            );
            rest = &rest[i + 1..];
        }
    }

    #[test]
    fn alias_block_is_sorted_and_fenced() {
        let block = alias_block();
        assert!(block.starts_with("---\nAdmiral Croft=The Admiral=Admiral\n"));
        assert!(block.contains("\nMrs Smith=Hamilton=Smith=Miss Hamilton\n"));
        assert!(block.ends_with("\nWilliam Walter Elliot=William=Mr Elliot=Elliot\n---"));
        let expected: Vec<&str> = PERSUASION.lines().collect();
        let got: Vec<&str> = block.lines().filter(|l| *l != "---").collect();
        assert_eq!(got, expected);
        assert_eq!(block, alias_block());
    }

    #[test]
    fn singleton_alias_block() {
        let block = format_alias_block(&parse_character_list("Elizabeth").unwrap()).unwrap();
        assert_eq!(block, "---\nElizabeth\n---");
    }

    #[test]
    fn attribution_prompt_structure() {
        let marked = "Chapter 8\n\n|1|\"That was in the year six;\"|1| |2|\"That happened before,\"|2|";
        let p = build_attribution_prompt(marked, &alias_block()).unwrap();
        assert!(p.starts_with("Instruction: You are an excellent linguist working in the field of literature."));
        assert!(p.ends_with("Never generate quote content and don't explain your reasoning."));
        let order = [
            "Passage:",
            marked,
            "Step 1:",
            "Step 2:",
            "Names",
            "Anne Elliot=",
            "Step 3:",
            "Your answer should follow this JSON format",
            "'quote_id_1' : 'predicted_speaker_1'",
        ];
        let mut at = 0;
        for needle in order {
            let pos = p[at..].find(needle).unwrap_or_else(|| panic!("{needle} out of order")) + at;
            at = pos;
        }
        residue_free(&p);
        assert!(!p.contains("Previous predictions"));
    }

    #[test]
    fn attribution_needs_markers() {
        assert_eq!(build_attribution_prompt("no markers", "---\nA\n---"), Err(PromptError::NoMarkers));
    }

    #[test]
    fn marker_count_is_not_interpolated() {
        let block = alias_block();
        let a = build_attribution_prompt("|1|\"a\"|1|", &block).unwrap();
        let b = build_attribution_prompt("|1|\"a\"|1| |2|\"b\"|2| |3|\"c\"|3|", &block).unwrap();
        let strip = |p: &str, m: &str| p.replace(m, "");
        assert_eq!(strip(&a, "|1|\"a\"|1|"), strip(&b, "|1|\"a\"|1| |2|\"b\"|2| |3|\"c\"|3|"));
    }

    #[test]
    fn incremental_prompt() {
        let mut prev = BTreeMap::new();
        prev.insert(2, "A".to_string());
        prev.insert(4, "B".to_string());
        assert_eq!(format_previous_predictions(&prev), "{ '2': 'A', '4': 'B' }");
        let p = build_incremental_prompt("|1|\"x\"|1|", &alias_block(), &prev).unwrap();
        assert!(p.contains("Previous predictions:\n\n---\n{ '2': 'A', '4': 'B' }\n---"));
        assert!(p.contains("Step 1: Attribute sequentially each quote to their speaker. Update the previous predictions if you think it contains wrong speaker prediction."));
        assert!(p.contains("and previous predictions."));
        assert_eq!(p, build_incremental_prompt("|1|\"x\"|1|", &alias_block(), &prev).unwrap());
        residue_free(&p);

        let one: BTreeMap<usize, String> = [(7, "O'Hara".to_string())].into();
        assert_eq!(format_previous_predictions(&one), "{ '7': 'O\\'Hara' }");
        assert_eq!(build_incremental_prompt("|1|\"x\"|1|", &alias_block(), &BTreeMap::new()), Err(PromptError::EmptyPrevious));
    }

    fn csg_input(cloze: bool) -> CsgPromptInput {
        CsgPromptInput {
            cloze,
            title: "Persuasion".into(),
            author: "Jane Austen".into(),
            corrupted_passage: if cloze {
                "\"The whole history,\" repeated [MASK], laughing.\n\n\"But,\" continued Emma, presently.".into()
            } else {
                "Captain Stone left his seat.\n\n\"You were not formerly, I know.\"".into()
            },
            target_quote: "\"The whole history,\"".into(),
            referring_expression: cloze.then(|| "repeated Anne".into()),
        }
    }

    #[test]
    fn csg_prompts() {
        let cloze = build_csg_prompt(&csg_input(true)).unwrap();
        assert!(cloze.starts_with("You will be given a passage of the book Persuasion written by Jane Austen that you have seen in your training data. Find the proper name that fills the [MASK] token."));
        assert!(cloze.contains("repeated [MASK]"));
        assert!(cloze.ends_with("Target quote:\n\n\"The whole history,\""));
        let speaker = build_csg_prompt(&csg_input(false)).unwrap();
        assert!(speaker.contains("Find the true speaker name of the target quote."));
        for p in [&cloze, &speaker] {
            assert!(p.contains("You must make a guess, even if you are uncertain."));
            assert!(p.contains("that you have seen in your training data"));
            assert!(p.contains("<speaker>[SPEAKER]<\\speaker>"));
            residue_free(p);
        }
    }

    #[test]
    fn csg_cloze_requires_referring_expression() {
        let mut item = csg_input(true);
        item.referring_expression = None;
        assert_eq!(build_csg_prompt(&item), Err(PromptError::MissingReferringExpression));
        let mut item = csg_input(true);
        item.corrupted_passage = item.corrupted_passage.replace("[MASK]", "Emma");
        assert_eq!(build_csg_prompt(&item), Err(PromptError::MaskCount(0)));
    }

    #[test]
    fn name_cloze_prompt() {
        let p = build_name_cloze_prompt("The door opened and [MASK] walked in.").unwrap();
        assert!(p.contains("The door opened and [MASK] walked in."));
        assert!(!p.contains("written by"));
        assert!(!p.contains("Persuasion"));
        assert_eq!(p, build_name_cloze_prompt("The door opened and [MASK] walked in.").unwrap());
        assert_eq!(build_name_cloze_prompt("[MASK] and [MASK]"), Err(PromptError::MaskCount(2)));
        assert_eq!(build_name_cloze_prompt("nobody"), Err(PromptError::MaskCount(0)));
        residue_free(&p);
    }

    #[test]
    fn slot_values_are_not_rescanned() {
        let t = PromptTemplate::parse(PromptFamily::NameCloze, "a {{passage}} b").unwrap();
        assert_eq!(t.render(&[("passage", "{{passage}}")]).unwrap(), "a {{passage}} b");
        assert_eq!(t.render(&[]), Err(PromptError::UnfilledSlot("passage".into())));
    }

    #[test]
    fn builtin_templates_declare_expected_slots() {
        let t = PromptTemplates::default();
        assert_eq!(t.get(PromptFamily::Attribution).slots(), vec!["passage", "alias_block"]);
        assert_eq!(t.get(PromptFamily::IncrementalAttribution).slots(), vec!["passage", "previous", "alias_block"]);
        assert_eq!(t.get(PromptFamily::NameCloze).slots(), vec!["passage"]);
    }

    #[test]
    fn overrides_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("name_cloze.txt"), "Fill: {{passage}}\n").unwrap();
        let t = PromptTemplates::with_overrides(dir.path()).unwrap();
        assert_eq!(t.name_cloze("x [MASK] y").unwrap(), "Fill: x [MASK] y");
        assert!(t.attribution("|1|\"a\"|1|", "---\nA\n---").unwrap().starts_with("Instruction:"));
    }
}

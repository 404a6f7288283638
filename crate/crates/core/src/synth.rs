//! Deterministic synthetic novels in the on-disk corpus format, for tests,
//! demos and the acceptance suite.
//!
//! Every quote text is unique, speakers include four major characters and
//! two minor ones (one of unknown gender), and all three quote types occur.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, CorpusOptions, Novel, NovelMetadata, SubsetTag};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    /// Paragraph count per chapter; each paragraph holds one quote.
    pub chapter_paragraphs: Vec<usize>,
    pub subset: SubsetTag,
    pub title: String,
    pub author: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            chapter_paragraphs: vec![8, 36, 12],
            subset: SubsetTag::Pdnc1,
            title: "The Quiet Street".into(),
            author: "A. Writer".into(),
        }
    }
}

/// Raw file contents of one generated novel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSources {
    pub id: String,
    pub text: String,
    pub quotation_csv: String,
    pub characters_csv: String,
    pub metadata_json: String,
}

struct Cast {
    canonical: &'static str,
    aliases: &'static [&'static str],
    gender: &'static str,
}

const MAJOR: [Cast; 4] = [
    Cast { canonical: "Margaret Hale", aliases: &["Margaret", "Miss Hale"], gender: "female" },
    Cast { canonical: "John Thornton", aliases: &["Thornton", "Mr Thornton", "John"], gender: "male" },
    Cast { canonical: "Edith Lennox", aliases: &["Edith", "Mrs Lennox"], gender: "female" },
    Cast { canonical: "Nicholas Higgins", aliases: &["Higgins", "Nicholas"], gender: "male" },
];

const MINOR: [Cast; 2] = [
    Cast { canonical: "Dixon", aliases: &["Martha Dixon"], gender: "female" },
    Cast { canonical: "The Stranger", aliases: &["Stranger"], gender: "" },
];

const NARRATION: [&str; 8] = [
    "looked towards the window",
    "set down the cup",
    "walked slowly across the room",
    "paused by the door",
    "glanced at the letter",
    "folded the newspaper",
    "stood near the fire",
    "turned away for a moment",
];

const WORDS: [&str; 24] = [
    "bright", "quiet", "morning", "river", "letter", "garden", "winter", "candle", "window", "market", "silver", "train",
    "orchard", "meadow", "harbour", "shadow", "lantern", "bridge", "meeting", "journey", "basket", "kettle", "ribbon", "thunder",
];

/// A phrase unique to `n`: the base-24 digits of `n` spelled as words.
fn unique_phrase(n: usize) -> String {
    let mut digits = Vec::new();
    let mut k = n;
    loop {
        digits.push(WORDS[k % WORDS.len()]);
        k /= WORDS.len();
        if k == 0 {
            break;
        }
    }
    while digits.len() < 3 {
        digits.push("indeed");
    }
    digits.join(" ")
}

fn pronoun(gender: &str) -> &'static str {
    match gender {
        "female" => "she",
        "male" => "he",
        _ => "they",
    }
}

fn py_list(items: &[String]) -> String {
    let inner: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
    format!("[{}]", inner.join(", "))
}

fn py_spans(spans: &[(usize, usize)]) -> String {
    let inner: Vec<String> = spans.iter().map(|(s, e)| format!("[{s}, {e}]")).collect();
    format!("[{}]", inner.join(", "))
}

struct Builder {
    text: String,
    rows: Vec<Vec<String>>,
    next_quote: usize,
    phrase_base: usize,
}

impl Builder {
    fn quote_body(&mut self, lead: &str) -> String {
        let n = self.phrase_base + self.next_quote;
        self.next_quote += 1;
        format!("{lead} {}", unique_phrase(n))
    }

    /// Appends `"body"` and returns the byte span of `body`.
    fn push_quoted(&mut self, body: &str) -> (usize, usize) {
        self.text.push('"');
        let s = self.text.len();
        self.text.push_str(body);
        let e = self.text.len();
        self.text.push('"');
        (s, e)
    }

    fn record(&mut self, subs: Vec<String>, spans: Vec<(usize, usize)>, speaker: &str, qtype: &str, referring: &str) {
        let id = format!("Q{}", self.rows.len());
        self.rows.push(vec![
            id,
            subs.join(" "),
            py_list(&subs),
            py_spans(&spans),
            speaker.to_string(),
            "[]".into(),
            qtype.into(),
            referring.into(),
            "[]".into(),
            "[]".into(),
            "[]".into(),
        ]);
    }
}

const LEADS: [&str; 6] = [
    "I believe the",
    "You must remember the",
    "Nobody mentioned the",
    "We shall see the",
    "Perhaps it was the",
    "Tell me about the",
];

/// Generates one novel. The same `(id, spec)` always gives the same bytes.
pub fn generate(id: &str, spec: &SynthSpec) -> SynthSources {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder {
        text: format!("{}\n\n", spec.title.to_uppercase()),
        rows: Vec::new(),
        next_quote: 0,
        phrase_base: (spec.seed as usize % 997) * 10_000,
    };
    let total: usize = spec.chapter_paragraphs.iter().sum();
    let mut speakers: Vec<usize> = (0..total).map(|i| i % MAJOR.len()).collect();
    speakers.shuffle(&mut rng);
    // A few minor-character quotes, well under the major threshold.
    let mut minor_slots: Vec<usize> = (0..total).step_by(9).skip(1).take(4).collect();
    minor_slots.sort_unstable();

    let mut para = 0;
    for (ci, &paras) in spec.chapter_paragraphs.iter().enumerate() {
        b.text.push_str(&format!("Chapter {}\n\n", ci + 1));
        for _ in 0..paras {
            let cast: &Cast = match minor_slots.iter().position(|&s| s == para) {
                Some(k) => &MINOR[k % MINOR.len()],
                None => &MAJOR[speakers[para]],
            };
            if rng.gen_bool(0.6) {
                let other = &MAJOR[rng.gen_range(0..MAJOR.len())];
                let name = if rng.gen_bool(0.5) { other.canonical } else { other.aliases[rng.gen_range(0..other.aliases.len())] };
                b.text.push_str(&format!("{name} {}. ", NARRATION[rng.gen_range(0..NARRATION.len())]));
            }
            let lead = LEADS[rng.gen_range(0..LEADS.len())];
            let alias = if rng.gen_bool(0.4) { cast.canonical } else { cast.aliases[rng.gen_range(0..cast.aliases.len())] };
            match rng.gen_range(0..4) {
                0 => {
                    let q = b.quote_body(lead);
                    let span = b.push_quoted(&q);
                    let referring = format!("said {alias}");
                    b.text.push_str(&format!(" {referring}."));
                    b.record(vec![q], vec![span], cast.canonical, "Explicit", &referring);
                }
                1 => {
                    let q1 = format!("{},", b.quote_body(lead));
                    let s1 = b.push_quoted(&q1);
                    let referring = format!("said {alias}");
                    b.text.push_str(&format!(" {referring}, "));
                    let q2 = format!("{}.", b.quote_body("and then the"));
                    let s2 = b.push_quoted(&q2);
                    b.record(vec![q1, q2], vec![s1, s2], cast.canonical, "Explicit", &referring);
                }
                2 => {
                    let q = b.quote_body(lead);
                    let span = b.push_quoted(&q);
                    let referring = format!("{} replied", pronoun(cast.gender));
                    b.text.push_str(&format!(" {referring}."));
                    b.record(vec![q], vec![span], cast.canonical, "Anaphoric", &referring);
                }
                _ => {
                    let q = format!("{}.", b.quote_body(lead));
                    let span = b.push_quoted(&q);
                    b.record(vec![q], vec![span], cast.canonical, "Implicit", "");
                }
            }
            b.text.push_str("\n\n");
            para += 1;
        }
    }

    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Always).from_writer(Vec::new());
    w.write_record(crate::corpus::COLUMNS).expect("in-memory write");
    for r in &b.rows {
        w.write_record(r).expect("in-memory write");
    }
    let quotation_csv = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");

    let mut characters_csv = String::from("canonical,aliases,gender\n");
    for c in MAJOR.iter().chain(MINOR.iter()) {
        characters_csv.push_str(&format!("{},{},{}\n", c.canonical, c.aliases.join("="), c.gender));
    }
    let metadata_json = serde_json::to_string_pretty(&serde_json::json!({
        "title": spec.title,
        "author": spec.author,
        "subset": spec.subset,
    }))
    .expect("metadata serializes");

    SynthSources { id: id.to_string(), text: b.text, quotation_csv, characters_csv, metadata_json }
}

impl SynthSources {
    pub fn novel(&self) -> Result<Novel, CorpusError> {
        let meta: NovelMetadata = serde_json::from_str(&self.metadata_json)
            .map_err(|e| CorpusError::Malformed { what: "metadata.json", detail: e.to_string() })?;
        Novel::from_sources(
            &self.id,
            self.text.clone(),
            &self.quotation_csv,
            &self.characters_csv,
            meta,
            &CorpusOptions::default(),
        )
    }

    /// Writes `<root>/<id>/{novel.txt, quotation_info.csv, characters.csv, metadata.json}`.
    pub fn write_to(&self, root: &Path) -> std::io::Result<PathBuf> {
        let dir = root.join(&self.id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("novel.txt"), &self.text)?;
        std::fs::write(dir.join("quotation_info.csv"), &self.quotation_csv)?;
        std::fs::write(dir.join("characters.csv"), &self.characters_csv)?;
        std::fs::write(dir.join("metadata.json"), &self.metadata_json)?;
        Ok(dir)
    }
}

/// A corpus of `n` novels with ids `novel_00`, `novel_01`, ...; the first
/// `treated` of them are tagged as the post-cutoff subset.
pub fn generate_corpus(n: usize, treated: usize, seed: u64) -> Vec<SynthSources> {
    (0..n)
        .map(|i| {
            let spec = SynthSpec {
                seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
                chapter_paragraphs: vec![6 + i % 3, 30 + (i * 7) % 11, 10],
                subset: if i < treated { SubsetTag::Pdnc2 } else { SubsetTag::Pdnc1 },
                title: format!("Synthetic Novel {i}"),
                author: format!("Author {}", i % 5),
            };
            generate(&format!("novel_{i:02}"), &spec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CharacterTier, QuoteType};

    #[test]
    fn generated_novel_validates() {
        let src = generate("demo", &SynthSpec::default());
        let novel = src.novel().unwrap();
        assert_eq!(novel.chapters.len(), 4, "title block plus three chapters");
        assert_eq!(novel.quotes.len(), 56);
        for t in QuoteType::ALL {
            assert!(novel.quotes.iter().any(|q| q.quote_type == t), "{t:?} missing");
        }
        for c in &MAJOR {
            assert_eq!(novel.character_tier(c.canonical).unwrap(), CharacterTier::MajorOrIntermediate);
        }
        assert_eq!(novel.character_tier("Dixon").unwrap(), CharacterTier::Minor);
        let texts: std::collections::HashSet<&str> =
            novel.quotes.iter().flat_map(|q| q.sub_quotations.iter().map(String::as_str)).collect();
        let n: usize = novel.quotes.iter().map(|q| q.sub_quotations.len()).sum();
        assert_eq!(texts.len(), n, "sub-quotation texts are unique");
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate("a", &SynthSpec::default()), generate("a", &SynthSpec::default()));
        let other = SynthSpec { seed: 2, ..SynthSpec::default() };
        assert_ne!(generate("a", &SynthSpec::default()).text, generate("a", &other).text);
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        for s in generate_corpus(3, 1, 5) {
            let path = s.write_to(dir.path()).unwrap();
            let novel = crate::corpus::load_novel_dir(&path, &CorpusOptions::default()).unwrap();
            let mem = s.novel().unwrap();
            assert_eq!((&novel.text, &novel.quotes, &novel.title), (&mem.text, &mem.quotes, &mem.title));
        }
    }
}

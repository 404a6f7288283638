//! Character lists and the alias map used both for prompting and for
//! resolving generated names back to canonical character ids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    pub fn parse(raw: &str) -> Gender {
        match raw.trim().to_ascii_lowercase().as_str() {
            "female" | "f" | "woman" | "w" => Gender::Female,
            "male" | "m" | "man" => Gender::Male,
            _ => Gender::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub id: String,
    /// Surface names; the canonical id is always the first entry.
    pub aliases: Vec<String>,
    pub gender: Gender,
    #[serde(default)]
    pub quote_count: usize,
}

impl Character {
    fn new(id: &str, aliases: impl IntoIterator<Item = String>, gender: Gender) -> Character {
        let id = id.trim().to_string();
        let mut all = vec![id.clone()];
        for alias in aliases {
            let alias = alias.trim();
            if alias.is_empty() || all.iter().any(|a| fold(a) == fold(alias)) {
                continue;
            }
            all.push(alias.to_string());
        }
        Character { id, aliases: all, gender, quote_count: 0 }
    }
}

/// Bidirectional map between canonical ids and every alias.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AliasMap {
    characters: Vec<Character>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
    #[serde(skip)]
    by_alias: HashMap<String, usize>,
}

pub(crate) fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

impl AliasMap {
    pub fn from_characters(characters: Vec<Character>) -> Result<AliasMap, CorpusError> {
        if characters.is_empty() {
            return Err(CorpusError::EmptyCharacterList);
        }
        let mut map = AliasMap { characters: Vec::new(), by_id: HashMap::new(), by_alias: HashMap::new() };
        for c in characters {
            map.insert(c)?;
        }
        Ok(map)
    }

    fn insert(&mut self, c: Character) -> Result<(), CorpusError> {
        let idx = self.characters.len();
        if let Some(&other) = self.by_id.get(&c.id) {
            return Err(CorpusError::DuplicateAlias {
                alias: c.id.clone(),
                first: self.characters[other].id.clone(),
                second: c.id,
            });
        }
        for alias in &c.aliases {
            if let Some(&other) = self.by_alias.get(&fold(alias)) {
                return Err(CorpusError::DuplicateAlias {
                    alias: alias.clone(),
                    first: self.characters[other].id.clone(),
                    second: c.id.clone(),
                });
            }
            self.by_alias.insert(fold(alias), idx);
        }
        self.by_id.insert(c.id.clone(), idx);
        self.characters.push(c);
        Ok(())
    }

    /// Rebuilds the lookup tables, e.g. after deserialization.
    pub fn reindexed(self) -> Result<AliasMap, CorpusError> {
        AliasMap::from_characters(self.characters)
    }

    pub fn characters(&self) -> &[Character] {
        &self.characters
    }

    pub fn get(&self, id: &str) -> Option<&Character> {
        self.by_id.get(id).map(|&i| &self.characters[i])
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn resolve(&self, name: &str) -> Option<&str> {
        self.by_alias.get(&fold(name)).map(|&i| self.characters[i].id.as_str())
    }

    pub(crate) fn set_quote_counts(&mut self, counts: &HashMap<String, usize>) {
        for c in &mut self.characters {
            c.quote_count = counts.get(&c.id).copied().unwrap_or(0);
        }
    }
}

/// Returns the canonical id for `name`, or `None` when it is not a listed alias.
///
/// Matching is exact after trimming and case-folding; there is no substring
/// or fuzzy matching.
pub fn resolve_alias<'a>(name: &str, map: &'a AliasMap) -> Option<&'a str> {
    map.resolve(name)
}

/// Parses a character file.
///
/// Two layouts are accepted:
/// * one character per line, `Canonical=Alias1=Alias2`, gender unknown;
/// * CSV with a `canonical,aliases,gender` header, aliases `=`-separated.
pub fn parse_character_list(raw: &str) -> Result<AliasMap, CorpusError> {
    let first = raw.lines().map(str::trim).find(|l| !l.is_empty());
    let Some(first) = first else {
        return Err(CorpusError::EmptyCharacterList);
    };
    let header = first.split(',').next().unwrap_or("").trim().trim_matches('"');
    if header.eq_ignore_ascii_case("canonical") {
        parse_csv(raw)
    } else {
        parse_lines(raw)
    }
}

fn parse_lines(raw: &str) -> Result<AliasMap, CorpusError> {
    let mut chars = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('=');
        let id = parts.next().unwrap_or("").trim();
        if id.is_empty() {
            return Err(CorpusError::Malformed { what: "character line", detail: format!("empty canonical name in {line:?}") });
        }
        chars.push(Character::new(id, parts.map(str::to_string), Gender::Unknown));
    }
    AliasMap::from_characters(chars)
}

fn parse_csv(raw: &str) -> Result<AliasMap, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(raw.as_bytes());
    let headers = reader.headers().map_err(|e| CorpusError::csv("characters", e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(c_id), c_alias, c_gender) = (col("canonical"), col("aliases"), col("gender")) else {
        return Err(CorpusError::Malformed { what: "characters header", detail: "missing canonical column".into() });
    };
    let mut chars = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CorpusError::csv("characters", e))?;
        let id = rec.get(c_id).unwrap_or("").trim();
        if id.is_empty() {
            continue;
        }
        let aliases =
            c_alias.and_then(|i| rec.get(i)).map(|s| s.split('=').map(str::to_string).collect::<Vec<_>>()).unwrap_or_default();
        let gender = c_gender.and_then(|i| rec.get(i)).map(Gender::parse).unwrap_or(Gender::Unknown);
        chars.push(Character::new(id, aliases, gender));
    }
    AliasMap::from_characters(chars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_first_then_aliases() {
        let map = parse_character_list("Anne Elliot=Miss Anne=Miss Anne Elliot=Anne\n").unwrap();
        let anne = map.get("Anne Elliot").unwrap();
        assert_eq!(anne.aliases, vec!["Anne Elliot", "Miss Anne", "Miss Anne Elliot", "Anne"]);
        assert_eq!(anne.gender, Gender::Unknown);
    }

    #[test]
    fn singleton_line() {
        let map = parse_character_list("Elizabeth\n").unwrap();
        assert_eq!(map.get("Elizabeth").unwrap().aliases, vec!["Elizabeth"]);
    }

    #[test]
    fn duplicate_alias_names_both_characters() {
        let err = parse_character_list("Anne Elliot=Anne\nAnne Smith=Anne\n").unwrap_err();
        match err {
            CorpusError::DuplicateAlias { alias, first, second } => {
                assert_eq!(alias, "Anne");
                assert_eq!(first, "Anne Elliot");
                assert_eq!(second, "Anne Smith");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_detection_is_case_insensitive() {
        assert!(parse_character_list("A=Bob\nB=bob\n").is_err());
    }

    #[test]
    fn repeated_alias_within_one_character_is_collapsed() {
        let map = parse_character_list("Anne=anne=Anne\n").unwrap();
        assert_eq!(map.get("Anne").unwrap().aliases.len(), 1);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_character_list(""), Err(CorpusError::EmptyCharacterList)));
        assert!(matches!(parse_character_list("  \n\n"), Err(CorpusError::EmptyCharacterList)));
    }

    #[test]
    fn csv_layout_with_gender() {
        let raw = "canonical,aliases,gender\n\"Captain Wentworth\",\"Wentworth=Frederick Wentworth\",male\nAnne Elliot,Anne,Female\nThe Waiter,,\n";
        let map = parse_character_list(raw).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map.get("Captain Wentworth").unwrap().gender, Gender::Male);
        assert_eq!(map.get("Anne Elliot").unwrap().gender, Gender::Female);
        assert_eq!(map.get("The Waiter").unwrap().gender, Gender::Unknown);
        assert_eq!(resolve_alias("Frederick Wentworth", &map), Some("Captain Wentworth"));
    }

    #[test]
    fn resolution_rules() {
        let map = parse_character_list(
            "Anne Elliot=Miss Anne=Miss Anne Elliot=Anne\nCaptain Wentworth=Wentworth=Frederick Wentworth=Frederick\n",
        )
        .unwrap();
        assert_eq!(resolve_alias("Wentworth", &map), Some("Captain Wentworth"));
        assert_eq!(resolve_alias("  anne  ", &map), Some("Anne Elliot"));
        assert_eq!(resolve_alias("Gandalf", &map), None);
        assert_eq!(resolve_alias("Went", &map), None);
        assert_eq!(resolve_alias("Captain Wentworth and Anne", &map), None);
    }
}

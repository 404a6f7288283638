//! Named-mention scanning and replacement-name bookkeeping.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{AliasMap, Character, Gender};

pub const DEFAULT_HONORIFICS: &[&str] = &[
    "Mr",
    "Mr.",
    "Mrs",
    "Mrs.",
    "Miss",
    "Ms",
    "Ms.",
    "Master",
    "Madam",
    "Madame",
    "Mme",
    "Mlle",
    "Dr",
    "Dr.",
    "Doctor",
    "Sir",
    "Dame",
    "Lady",
    "Lord",
    "Captain",
    "Capt.",
    "Admiral",
    "Colonel",
    "Col.",
    "Major",
    "General",
    "Lieutenant",
    "Sergeant",
    "Professor",
    "Prof.",
    "Reverend",
    "Rev.",
    "Father",
    "Mother",
    "Sister",
    "Brother",
    "Aunt",
    "Uncle",
    "Cousin",
    "Count",
    "Countess",
    "Duke",
    "Duchess",
    "Prince",
    "Princess",
    "King",
    "Queen",
    "Monsieur",
    "Mademoiselle",
    "Signor",
    "Signora",
    "Herr",
    "Frau",
    "Fräulein",
    "Old",
    "Young",
    "Little",
    "The",
];

/// Honorifics and replacement-name pools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NameConfig {
    pub honorifics: Vec<String>,
    pub female_first: Vec<String>,
    pub male_first: Vec<String>,
    pub surnames: Vec<String>,
    /// First/surname pairs that are never combined.
    pub forbidden_pairs: Vec<(String, String)>,
}

impl Default for NameConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        NameConfig {
            honorifics: s(DEFAULT_HONORIFICS),
            female_first: s(&["Emma", "Elizabeth"]),
            male_first: s(&["Henry", "Joseph"]),
            surnames: s(&["Stone", "Walker", "Smith"]),
            forbidden_pairs: vec![("Emma".into(), "Stone".into())],
        }
    }
}

impl NameConfig {
    pub fn is_honorific(&self, word: &str) -> bool {
        self.honorifics.iter().any(|h| h == word)
    }

    /// Drops leading honorifics.
    pub fn strip_honorifics<'a>(&self, name: &'a str) -> &'a str {
        let mut rest = name.trim();
        loop {
            let Some((head, tail)) = rest.split_once(char::is_whitespace) else { return rest };
            if self.is_honorific(head) {
                rest = tail.trim_start();
            } else {
                return rest;
            }
        }
    }
}

/// An alias occurrence in some text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub range: Range<usize>,
    pub character: String,
    pub alias: String,
}

/// Whether an alias counts as a proper name: some word starts uppercase.
pub fn is_proper(alias: &str) -> bool {
    alias.split_whitespace().any(|w| w.chars().next().is_some_and(char::is_uppercase))
}

fn bounded(text: &str, r: &Range<usize>) -> bool {
    let before = text[..r.start].chars().next_back();
    let after = text[r.end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

/// All proper-name alias occurrences of every character, case-sensitive and
/// word-bounded. Longer aliases claim text first; results are sorted by
/// position and never overlap.
pub fn find_mentions(text: &str, map: &AliasMap) -> Vec<Mention> {
    let mut candidates: Vec<(&str, &str)> = map
        .characters()
        .iter()
        .flat_map(|c| c.aliases.iter().filter(|a| is_proper(a)).map(move |a| (a.as_str(), c.id.as_str())))
        .collect();
    candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
    let mut taken: Vec<Range<usize>> = Vec::new();
    let mut out = Vec::new();
    for (alias, id) in candidates {
        for (at, _) in text.match_indices(alias) {
            let r = at..at + alias.len();
            if !bounded(text, &r) || taken.iter().any(|t| t.start < r.end && r.start < t.end) {
                continue;
            }
            taken.push(r.clone());
            out.push(Mention { range: r, character: id.to_string(), alias: alias.to_string() });
        }
    }
    out.sort_by_key(|m| m.range.start);
    out
}

/// Word-bounded, case-sensitive occurrences of any of `aliases` in `text`.
pub fn contains_alias(text: &str, aliases: &[String]) -> bool {
    aliases
        .iter()
        .filter(|a| is_proper(a))
        .any(|a| text.match_indices(a.as_str()).any(|(at, _)| bounded(text, &(at..at + a.len()))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    First,
    Surname,
}

/// Replacement identity for one speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub first: String,
    pub surname: String,
    pub gender: Gender,
}

/// Rewrites a speaker's alias to the replacement identity, keeping leading
/// honorifics and mirroring the alias shape: first name only, surname only,
/// or both.
pub struct Renamer<'a> {
    names: &'a NameConfig,
    firsts: HashSet<String>,
    surnames: HashSet<String>,
    pub replacement: Replacement,
}

impl<'a> Renamer<'a> {
    pub fn new(character: &Character, names: &'a NameConfig, replacement: Replacement) -> Renamer<'a> {
        let mut firsts = HashSet::new();
        let mut surnames = HashSet::new();
        for alias in &character.aliases {
            let words: Vec<&str> = names.strip_honorifics(alias).split_whitespace().collect();
            if words.len() >= 2 {
                firsts.insert(words[0].to_string());
                surnames.insert(words[words.len() - 1].to_string());
            }
        }
        Renamer { names, firsts, surnames, replacement }
    }

    fn classify(&self, word: &str, after_honorific: bool) -> Part {
        match (self.firsts.contains(word), self.surnames.contains(word)) {
            (true, false) => Part::First,
            (false, true) => Part::Surname,
            _ if after_honorific => Part::Surname,
            _ => Part::First,
        }
    }

    pub fn rename(&self, alias: &str) -> String {
        let mut kept = Vec::new();
        let mut rest = alias.trim();
        while let Some((head, tail)) = rest.split_once(char::is_whitespace) {
            if !self.names.is_honorific(head) {
                break;
            }
            kept.push(head);
            rest = tail.trim_start();
        }
        if self.names.is_honorific(rest) {
            // Title-only alias such as "The Admiral": keep the title, add the surname.
            kept.push(rest);
            if kept.len() > 1 && kept[0] == "The" {
                kept.remove(0);
            }
            return format!("{} {}", kept.join(" "), self.replacement.surname);
        }
        let words: Vec<&str> = rest.split_whitespace().collect();
        let name = if words.len() >= 2 {
            format!("{} {}", self.replacement.first, self.replacement.surname)
        } else {
            match self.classify(words.first().copied().unwrap_or(""), !kept.is_empty()) {
                Part::First => self.replacement.first.clone(),
                Part::Surname => self.replacement.surname.clone(),
            }
        };
        if kept.is_empty() {
            name
        } else {
            format!("{} {name}", kept.join(" "))
        }
    }
}

/// Lowercased words used anywhere in the novel's alias lists.
pub fn alias_words(map: &AliasMap) -> HashSet<String> {
    map.characters()
        .iter()
        .flat_map(|c| c.aliases.iter())
        .flat_map(|a| a.split(|ch: char| !ch.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Valid `(first, surname)` choices for a gender: neither part may appear
/// in any alias of the novel, and forbidden pairs are left out.
pub fn replacement_pool(gender: Gender, map: &AliasMap, names: &NameConfig) -> Vec<(String, String)> {
    let firsts = match gender {
        Gender::Female => &names.female_first,
        Gender::Male => &names.male_first,
        Gender::Unknown => return Vec::new(),
    };
    let used = alias_words(map);
    let fresh = |n: &&String| !used.contains(&n.to_lowercase());
    let mut out = Vec::new();
    for f in firsts.iter().filter(fresh) {
        for s in names.surnames.iter().filter(fresh) {
            if names.forbidden_pairs.iter().any(|(a, b)| a == f && b == s) {
                continue;
            }
            out.push((f.clone(), s.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_character_list;

    fn emma_map() -> AliasMap {
        parse_character_list(
            "canonical,aliases,gender\n\
             Emma Woodhouse,Emma=Miss Woodhouse,female\n\
             Miss Bates,Bates=Hetty Bates,female\n\
             Mr Knightley,Knightley=George Knightley,male\n\
             Harriet Smith,Harriet=Miss Smith,female\n",
        )
        .unwrap()
    }

    #[test]
    fn longest_alias_wins() {
        let map = emma_map();
        let text = "Miss Woodhouse smiled; Emma knew. Knightley and Mr Knightley came.";
        let m = find_mentions(text, &map);
        let found: Vec<&str> = m.iter().map(|m| &text[m.range.clone()]).collect();
        assert_eq!(found, vec!["Miss Woodhouse", "Emma", "Knightley", "Mr Knightley"]);
        assert!(find_mentions("Emmanuel and Batesville", &map).is_empty());
    }

    #[test]
    fn miss_bates_becomes_miss_smith() {
        let map = emma_map();
        let bates = map.get("Miss Bates").unwrap();
        let names = NameConfig::default();
        let r = Renamer::new(
            bates,
            &names,
            Replacement { first: "Elizabeth".into(), surname: "Smith".into(), gender: Gender::Female },
        );
        assert_eq!(r.rename("Miss Bates"), "Miss Smith");
        assert_eq!(r.rename("Bates"), "Smith");
        assert_eq!(r.rename("Hetty Bates"), "Elizabeth Smith");
        assert_eq!(r.rename("Hetty"), "Elizabeth");
        assert_eq!(r.rename("The Admiral"), "Admiral Smith");
    }

    #[test]
    fn pool_excludes_alias_words() {
        let map = emma_map();
        let names = NameConfig::default();
        let female = replacement_pool(Gender::Female, &map, &names);
        // Emma and Smith are used by the novel.
        assert_eq!(female, vec![("Elizabeth".to_string(), "Stone".to_string()), ("Elizabeth".into(), "Walker".into())]);
        assert!(replacement_pool(Gender::Unknown, &map, &names).is_empty());
        let fresh = parse_character_list("canonical,aliases,gender\nAnne Elliot,Anne,female\n").unwrap();
        let pool = replacement_pool(Gender::Female, &fresh, &names);
        assert!(!pool.contains(&("Emma".to_string(), "Stone".to_string())));
        assert_eq!(pool.len(), 5);
    }

    #[test]
    fn honorific_stripping() {
        let names = NameConfig::default();
        assert_eq!(names.strip_honorifics("Miss Smith"), "Smith");
        assert_eq!(names.strip_honorifics("Sir Walter Elliot"), "Walter Elliot");
        assert_eq!(names.strip_honorifics("Emma"), "Emma");
    }
}

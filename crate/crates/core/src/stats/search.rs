use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Per-novel search-result counts. The first CSV column is the novel id;
/// every other column is a numeric source such as `google` or `pile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCounts {
    pub sources: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl SearchCounts {
    /// Values for one source keyed by novel id.
    pub fn source(&self, name: &str) -> Option<BTreeMap<&str, f64>> {
        let j = self.sources.iter().position(|s| s.eq_ignore_ascii_case(name))?;
        Some(self.rows.iter().map(|(id, v)| (id.as_str(), v[j])).collect())
    }
}

pub fn read_search_counts<R: Read>(reader: R) -> Result<SearchCounts, StatsError> {
    let err = |m: String| StatsError::SearchTable(m);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(err("need a novel id column and at least one count column".into()));
    }
    let sources: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err(format!("row {}: non-numeric count for {id}", line + 2)))?;
        if rows.insert(id.clone(), values).is_some() {
            return Err(err(format!("duplicate novel id {id}")));
        }
    }
    Ok(SearchCounts { sources, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_table() {
        let t = read_search_counts("novel,google,bing,c4,pile\nEmma,12.5,3,0,1\nPersuasion,9,2.5,1,0\n".as_bytes()).unwrap();
        assert_eq!(t.sources, ["google", "bing", "c4", "pile"]);
        assert_eq!(t.source("Bing").unwrap()["Persuasion"], 2.5);
        assert!(t.source("yahoo").is_none());
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(read_search_counts("novel,google\nEmma,lots\n".as_bytes()).is_err());
        assert!(read_search_counts("novel,google\nEmma,1\nEmma,2\n".as_bytes()).is_err());
        assert!(read_search_counts("novel\nEmma\n".as_bytes()).is_err());
    }
}

//! Raw annotation rows (`quotation_info.csv`) and their plain-text verbalization.

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Column names in file order.
pub const COLUMNS: [&str; 11] = [
    "quoteID",
    "quoteText",
    "subQuotationList",
    "quoteByteSpans",
    "speaker",
    "addressees",
    "quoteType",
    "referringExpression",
    "mentionTextsList",
    "mentionSpansList",
    "mentionEntitiesList",
];

const QUOTE_TYPES: [&str; 3] = ["Explicit", "Anaphoric", "Implicit"];

/// One raw row, all eleven cells kept as the unescaped CSV strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    fields: Vec<String>,
}

impl AnnotationRecord {
    pub fn from_fields(fields: Vec<String>) -> Result<AnnotationRecord, CorpusError> {
        if fields.len() != COLUMNS.len() {
            return Err(CorpusError::ColumnCount { expected: COLUMNS.len(), found: fields.len() });
        }
        Ok(AnnotationRecord { fields })
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        COLUMNS.iter().position(|c| *c == column).map(|i| self.fields[i].as_str())
    }

    pub fn quote_id(&self) -> &str {
        &self.fields[0]
    }
}

/// Reads every row of a `quotation_info.csv` file. A header row is skipped
/// when its first cell is `quoteID`.
pub fn read_records(raw: &str) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(raw.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CorpusError::csv("quotation_info", e))?;
        if i == 0 && rec.get(0).map(str::trim) == Some(COLUMNS[0]) {
            continue;
        }
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        out.push(AnnotationRecord::from_fields(fields).map_err(|e| match e {
            CorpusError::ColumnCount { expected, found } => CorpusError::Malformed {
                what: "quotation_info row",
                detail: format!("row {} has {found} columns, expected {expected}", i + 1),
            },
            other => other,
        })?);
    }
    Ok(out)
}

pub fn write_records(records: &[AnnotationRecord]) -> Result<String, CorpusError> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Always).from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(|e| CorpusError::csv("quotation_info", e))?;
    for r in records {
        w.write_record(&r.fields).map_err(|e| CorpusError::csv("quotation_info", e))?;
    }
    let bytes = w.into_inner().map_err(|e| CorpusError::Malformed { what: "csv writer", detail: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn separator(column: &str) -> String {
    format!("; {column}: ")
}

/// Renders a record as `quoteID: ...; quoteText: ...; ...` in column order.
///
/// Fails when the record is not well formed: empty id, unknown quote type, or
/// a value that embeds a later column's separator (which would make the
/// rendering ambiguous).
pub fn verbalize_record(rec: &AnnotationRecord) -> Result<String, CorpusError> {
    let f = &rec.fields;
    if f[0].trim().is_empty() {
        return Err(CorpusError::Malformed { what: "annotation record", detail: "empty quoteID".into() });
    }
    if !QUOTE_TYPES.contains(&f[6].trim()) {
        return Err(CorpusError::Malformed {
            what: "annotation record",
            detail: format!("{}: unknown quoteType {:?}", f[0], f[6]),
        });
    }
    for (i, value) in f.iter().enumerate() {
        if COLUMNS[i + 1..].iter().any(|c| value.contains(&separator(c))) {
            return Err(CorpusError::Malformed {
                what: "annotation record",
                detail: format!("{}: column {} embeds a field separator", f[0], COLUMNS[i]),
            });
        }
    }
    let mut out = String::new();
    for (i, (col, value)) in COLUMNS.iter().zip(f).enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(col);
        out.push_str(": ");
        out.push_str(value);
    }
    Ok(out)
}

/// Inverse of [`verbalize_record`].
pub fn parse_verbalized(text: &str) -> Result<AnnotationRecord, CorpusError> {
    let bad = |detail: String| CorpusError::Malformed { what: "verbalized record", detail };
    let head = format!("{}: ", COLUMNS[0]);
    let mut rest = text.strip_prefix(head.as_str()).ok_or_else(|| bad("missing quoteID prefix".into()))?;
    let mut fields = Vec::with_capacity(COLUMNS.len());
    for col in &COLUMNS[1..] {
        let sep = separator(col);
        let at = rest.find(&sep).ok_or_else(|| bad(format!("missing {col}")))?;
        fields.push(rest[..at].to_string());
        rest = &rest[at + sep.len()..];
    }
    fields.push(rest.to_string());
    AnnotationRecord::from_fields(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW_ROW: &str = r#""Q0","and what is the use of a book, without pictures or conversations?","['and what is the use of a book,', 'without pictures or conversations?']","[[254, 284], [301, 335]]","Alice","[]","Explicit","thought Alice","[[], []]","[[], []]","[[], []]""#;
    const VERBALIZED: &str = "quoteID: Q0; quoteText: and what is the use of a book, without pictures or conversations?; subQuotationList: ['and what is the use of a book,', 'without pictures or conversations?']; quoteByteSpans: [[254, 284], [301, 335]]; speaker: Alice; addressees: []; quoteType: Explicit; referringExpression: thought Alice; mentionTextsList: [[], []]; mentionSpansList: [[], []]; mentionEntitiesList: [[], []]";

    #[test]
    fn reference_row_verbalizes_exactly() {
        let recs = read_records(RAW_ROW).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(verbalize_record(&recs[0]).unwrap(), VERBALIZED);
    }

    #[test]
    fn empty_lists_render_literally() {
        let recs = read_records(RAW_ROW).unwrap();
        let v = verbalize_record(&recs[0]).unwrap();
        assert!(v.contains("; addressees: []; "));
    }

    #[test]
    fn header_is_skipped() {
        let raw = format!("{}\n{}\n", COLUMNS.join(","), RAW_ROW);
        assert_eq!(read_records(&raw).unwrap().len(), 1);
    }

    #[test]
    fn wrong_column_count() {
        assert!(read_records("\"Q0\",\"x\"\n").is_err());
        assert!(AnnotationRecord::from_fields(vec!["a".into(); 10]).is_err());
    }

    #[test]
    fn malformed_records_refuse_to_verbalize() {
        let mut fields: Vec<String> = read_records(RAW_ROW).unwrap()[0].fields().to_vec();
        fields[6] = "Exclamatory".into();
        assert!(verbalize_record(&AnnotationRecord::from_fields(fields.clone()).unwrap()).is_err());
        fields[6] = "Explicit".into();
        fields[1] = "ambiguous; speaker: Bob".into();
        assert!(verbalize_record(&AnnotationRecord::from_fields(fields).unwrap()).is_err());
    }

    #[test]
    fn parse_back() {
        let rec = parse_verbalized(VERBALIZED).unwrap();
        assert_eq!(rec, read_records(RAW_ROW).unwrap()[0]);
    }

    #[test]
    fn write_then_read() {
        let recs = read_records(RAW_ROW).unwrap();
        let raw = write_records(&recs).unwrap();
        assert_eq!(read_records(&raw).unwrap(), recs);
    }
}

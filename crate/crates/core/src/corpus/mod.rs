//! Unified paper/review/reference data model and its JSONL storage.
//!
//! A corpus file holds one [`PaperRecord`] per line. Saving is canonical:
//! object keys are sorted, absent optional fields are omitted, and every
//! line ends with `\n`, so equal corpora serialize to identical bytes.

mod model;
mod validate;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub use model::{
    Decision, Hypothesis, PaperRecord, ReferenceRecord, ReviewDimension, ReviewRecord, SectionType,
    YearMonth,
};
pub use validate::{validate_record, Violation};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: record {id:?} is invalid: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        line: usize,
        id: String,
        violations: Vec<Violation>,
    },
}

/// Records in file order plus an id index. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<PaperRecord>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, checking every record and id uniqueness.
    /// Line numbers in errors are 1-based positions in `records`.
    pub fn from_records(records: Vec<PaperRecord>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let violations = validate_record(r);
            if !violations.is_empty() {
                return Err(CorpusError::Invalid {
                    line: i + 1,
                    id: r.id.clone(),
                    violations,
                });
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: r.id.clone(),
                });
            }
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[PaperRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PaperRecord> {
        self.records
    }

    pub fn get(&self, id: &str) -> Option<&PaperRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PaperRecord> {
        self.records.iter()
    }
}

/// Reads a JSONL corpus. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PaperRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
        lines.push(i + 1);
    }
    // report errors against physical line numbers
    Corpus::from_records(records).map_err(|e| match e {
        CorpusError::DuplicateId { line, id } => CorpusError::DuplicateId {
            line: lines[line - 1],
            id,
        },
        CorpusError::Invalid {
            line,
            id,
            violations,
        } => CorpusError::Invalid {
            line: lines[line - 1],
            id,
            violations,
        },
        other => other,
    })
}

/// Canonical single-line JSON for one record.
pub fn canonical_json(record: &PaperRecord) -> String {
    // `Value` objects are key-sorted maps, which gives the canonical order.
    let value = serde_json::to_value(record).expect("records always serialize");
    serde_json::to_string(&value).expect("values always serialize")
}

pub fn write_corpus<W: Write>(records: &[PaperRecord], w: &mut W) -> std::io::Result<()> {
    for r in records {
        w.write_all(canonical_json(r).as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the corpus atomically (temporary file, then rename).
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    crate::util::write_atomic(path, |w| write_corpus(corpus.records(), w))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str) -> PaperRecord {
        PaperRecord::new(id, format!("Title {id}"), "ICLR", YearMonth::new(2023, 1))
    }

    #[test]
    fn empty_file_loads_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(load_corpus(&p).unwrap().is_empty());
    }

    #[test]
    fn saving_empty_corpus_gives_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        save_corpus(&Corpus::default(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"");
    }

    #[test]
    fn two_records_keep_input_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let c = Corpus::from_records(vec![record("b"), record("a")]).unwrap();
        save_corpus(&c, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"id\":\"b\""));
        assert!(text.ends_with('\n'));
        assert_eq!(load_corpus(&p).unwrap(), c);
    }

    #[test]
    fn canonical_keys_are_sorted_and_absent_fields_omitted() {
        let json = canonical_json(&record("x"));
        assert_eq!(
            json,
            r#"{"abstract":"","id":"x","publication_date":"2023-01","references":[],"reviews":[],"sections":{},"title":"Title x","venue":"ICLR"}"#
        );
    }

    #[test]
    fn single_record_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let mut r = record("p1");
        r.reviews.push(ReviewRecord {
            text_review: "fine".into(),
            score: Some(7.0 / 9.0),
            ..Default::default()
        });
        r.sections
            .insert(SectionType::Conclusion, "We conclude.".into());
        r.decision = Some(Decision::Accepted);
        r.citation_count = Some(4);
        let line = format!("{}\n", canonical_json(&r));
        std::fs::write(&p, &line).unwrap();
        let c = load_corpus(&p).unwrap();
        assert_eq!(c.len(), 1);
        let q = dir.path().join("d.jsonl");
        save_corpus(&c, &q).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), line);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let good = canonical_json(&record("a"));
        std::fs::write(&p, format!("{good}\n\n{{not json\n")).unwrap();
        match load_corpus(&p) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let good = canonical_json(&record("a"));
        std::fs::write(&p, format!("{good}\n{good}\n")).unwrap();
        assert!(matches!(
            load_corpus(&p),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_record_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let mut r = record("a");
        r.title.clear();
        std::fs::write(&p, format!("{}\n", canonical_json(&r))).unwrap();
        assert!(matches!(load_corpus(&p), Err(CorpusError::Invalid { .. })));
    }

    #[test]
    fn unknown_keys_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let json = canonical_json(&record("a")).replacen('{', "{\"extra\":1,", 1);
        std::fs::write(&p, format!("{json}\n")).unwrap();
        assert!(matches!(
            load_corpus(&p),
            Err(CorpusError::Malformed { .. })
        ));
    }
}

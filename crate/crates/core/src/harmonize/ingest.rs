//! Raw venue exports to unified records.
//!
//! An export directory holds `*.jsonl` files, one submission per line:
//!
//! ```json
//! {"id": "abc", "venue": "ICLR 2023", "title": "...", "abstract": "...",
//!  "publication_date": "2023-05", "decision": "Accept: poster",
//!  "reviews": [{"rating": "8: accept", "summary": "..."}]}
//! ```
//!
//! `sections`, `hypothesis`, `references`, `citation_count`,
//! `influential_citation_count` and `field_of_study` are optional and use
//! the corpus field shapes. Review values may be strings or numbers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{harmonize_review, HarmonizeError, VenueTable};
use crate::corpus::{
    validate_record, Decision, Hypothesis, PaperRecord, ReferenceRecord, SectionType, YearMonth,
};

#[derive(Debug, Clone, Deserialize)]
pub struct RawSubmission {
    pub id: String,
    pub venue: String,
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_: String,
    pub publication_date: YearMonth,
    #[serde(default)]
    pub decision: Option<String>,
    #[serde(default)]
    pub reviews: Vec<BTreeMap<String, Value>>,
    #[serde(default)]
    pub sections: BTreeMap<SectionType, String>,
    #[serde(default)]
    pub hypothesis: Option<Hypothesis>,
    #[serde(default)]
    pub references: Vec<ReferenceRecord>,
    #[serde(default)]
    pub citation_count: Option<u64>,
    #[serde(default)]
    pub influential_citation_count: Option<u64>,
    #[serde(default)]
    pub field_of_study: Option<Vec<String>>,
}

/// "Accept (oral)", "Reject", "Withdrawn", ...
pub fn parse_decision(raw: &str) -> Decision {
    let d = raw.to_lowercase();
    if d.contains("reject") {
        Decision::Rejected
    } else if d.contains("accept") {
        Decision::Accepted
    } else {
        Decision::Unknown
    }
}

fn value_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VenueCounts {
    pub submissions: usize,
    pub reviews: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub files: usize,
    pub submissions: usize,
    pub reviews: usize,
    pub per_venue: BTreeMap<String, VenueCounts>,
    /// venue -> raw field -> occurrences without a mapping entry
    pub unmapped_fields: BTreeMap<String, BTreeMap<String, usize>>,
    /// `file:line: reason` for records dropped with `skip_bad`
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Converts one raw submission. Unmapped review fields are returned, not
/// dropped silently.
pub fn convert_submission(
    raw: RawSubmission,
    venues: &VenueTable,
) -> Result<(PaperRecord, Vec<String>), String> {
    let venue = venues
        .get(&raw.venue)
        .ok_or_else(|| format!("no mapping configured for venue {:?}", raw.venue))?;
    let mut record = PaperRecord::new(raw.id, raw.title, raw.venue.clone(), raw.publication_date);
    record.r#abstract = raw.abstract_;
    record.decision = raw.decision.as_deref().map(parse_decision);
    record.sections = raw.sections;
    record.hypothesis = raw.hypothesis;
    record.references = raw.references;
    record.citation_count = raw.citation_count;
    record.influential_citation_count = raw.influential_citation_count;
    record.field_of_study = raw.field_of_study;
    let mut unmapped = Vec::new();
    for rev in &raw.reviews {
        let fields: BTreeMap<String, String> = rev
            .iter()
            .map(|(k, v)| (k.clone(), value_string(v)))
            .collect();
        let h =
            harmonize_review(&fields, &venue.mapping, &venue.scales).map_err(|e| e.to_string())?;
        unmapped.extend(h.unmapped_fields);
        record.reviews.push(h.review);
    }
    let violations = validate_record(&record);
    if let Some(v) = violations.first() {
        return Err(format!("invalid record: {v}"));
    }
    Ok((record, unmapped))
}

fn export_files(dir: &Path) -> Result<Vec<PathBuf>, HarmonizeError> {
    let io = |e: std::io::Error| HarmonizeError::Config(format!("{}: {e}", dir.display()));
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Harmonizes every submission under `dir`, files in name order. Without
/// `skip_bad` the first malformed record aborts with its location.
pub fn ingest_export(
    dir: &Path,
    venues: &VenueTable,
    skip_bad: bool,
) -> Result<(Vec<PaperRecord>, IngestSummary), HarmonizeError> {
    let files = export_files(dir)?;
    let mut summary = IngestSummary {
        files: files.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for f in &files {
        let text = std::fs::read_to_string(f)
            .map_err(|e| HarmonizeError::Config(format!("{}: {e}", f.display())))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let location = format!("{}:{}", f.display(), i + 1);
            let converted = serde_json::from_str::<RawSubmission>(line)
                .map_err(|e| format!("malformed JSON: {e}"))
                .and_then(|raw| convert_submission(raw, venues))
                .and_then(|(r, unmapped)| {
                    if seen.insert(r.id.clone()) {
                        Ok((r, unmapped))
                    } else {
                        Err(format!("duplicate id {:?}", r.id))
                    }
                });
            match converted {
                Ok((r, unmapped)) => {
                    let counts = summary.per_venue.entry(r.venue.clone()).or_default();
                    counts.submissions += 1;
                    counts.reviews += r.reviews.len();
                    summary.submissions += 1;
                    summary.reviews += r.reviews.len();
                    for field in unmapped {
                        *summary
                            .unmapped_fields
                            .entry(r.venue.clone())
                            .or_default()
                            .entry(field)
                            .or_default() += 1;
                    }
                    records.push(r);
                }
                Err(reason) if skip_bad => summary.skipped.push(format!("{location}: {reason}")),
                Err(reason) => return Err(HarmonizeError::BadRecord { location, reason }),
            }
        }
    }
    if summary.submissions == 0 {
        summary
            .warnings
            .push(format!("no submissions found under {}", dir.display()));
    }
    Ok((records, summary))
}

use std::fmt;

use super::model::{Decision, PaperRecord, ReviewDimension};

/// One violated invariant, located by a field path such as `reviews[0].score`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violated record-level invariant. Id uniqueness is a corpus-level
/// property and is checked by [`super::Corpus::from_records`].
pub fn validate_record(r: &PaperRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if r.id.is_empty() {
        out.push(Violation::new("id", "must be nonempty"));
    }
    if r.title.trim().is_empty() {
        out.push(Violation::new("title", "must be nonempty"));
    }
    if !r.publication_date.is_valid() {
        out.push(Violation::new(
            "publication_date",
            format!("{} is not a valid year and month", r.publication_date),
        ));
    }
    if r.citation_count.is_some() && r.decision == Some(Decision::Rejected) {
        out.push(Violation::new(
            "citation_count",
            "citation counts are only defined for accepted or unknown decisions",
        ));
    }
    if let Some(h) = &r.hypothesis {
        if h.problem.trim().is_empty() {
            out.push(Violation::new("hypothesis.problem", "must be nonempty"));
        }
        if h.methodology.trim().is_empty() {
            out.push(Violation::new("hypothesis.methodology", "must be nonempty"));
        }
    }
    for (i, rev) in r.reviews.iter().enumerate() {
        for dim in ReviewDimension::ALL {
            if let Some(v) = rev.get(dim) {
                if !(0.0..=1.0).contains(&v) {
                    out.push(Violation::new(
                        format!("reviews[{i}].{dim}"),
                        format!("{v} is outside [0, 1]"),
                    ));
                }
            }
        }
        if rev.text_review.is_empty() && !rev.has_numeric() {
            out.push(Violation::new(
                format!("reviews[{i}].text_review"),
                "empty review text requires at least one numeric field",
            ));
        }
    }
    for (i, reference) in r.references.iter().enumerate() {
        if reference.title.trim().is_empty() {
            out.push(Violation::new(
                format!("references[{i}].title"),
                "must be nonempty",
            ));
        }
    }
    out
}

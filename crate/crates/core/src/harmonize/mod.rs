//! Venue review harmonization, prediction targets, temporal splits and
//! citation enrichment.

#[cfg(feature = "net")]
pub mod citations;
mod ingest;
mod mapping;
mod targets;

pub use ingest::{
    convert_submission, ingest_export, parse_decision, IngestSummary, RawSubmission, VenueCounts,
};
pub use mapping::{
    catalog_lookup, harmonize_review, normalize_field_name, parse_leading_number, FieldEntry,
    FieldMapping, HarmonizedReview, ReviewAttribute, ScaleSpec, VenueConfig, VenueTable,
    FIELD_CATALOG,
};
pub use targets::{
    citation_target, mean_review_score, record_citation_target, temporal_split,
    temporal_split_corpus, SplitSpec, TemporalSplit,
};

use crate::corpus::ReviewDimension;

#[derive(Debug, thiserror::Error)]
pub enum HarmonizeError {
    #[error("field {field:?}: cannot parse a number from {value:?}")]
    NumericParse { field: String, value: String },
    #[error("no scale configured for numeric attribute {attribute}")]
    MissingScale { attribute: ReviewDimension },
    #[error(
        "field {field:?}: value {value} normalizes to {normalized:.3}, outside the declared scale"
    )]
    OutOfScale {
        field: String,
        value: f64,
        normalized: f64,
    },
    #[error("invalid scale: max ({max}) must exceed min ({min})")]
    InvalidScale { min: f64, max: f64 },
    #[error("field {field:?} is mapped to both {first} and {second}")]
    ConflictingField {
        field: String,
        first: ReviewAttribute,
        second: ReviewAttribute,
    },
    #[error("months elapsed must be at least 1")]
    ZeroMonths,
    #[error("split fractions must lie in (0, 1) and sum to 1: {0:?}")]
    InvalidSplit([f64; 3]),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("mapping config: {0}")]
    Config(String),
    #[error("citation request failed: {0}")]
    Http(String),
    #[error("{location}: {reason}")]
    BadRecord { location: String, reason: String },
    #[error("malformed citation response: {0}")]
    MalformedResponse(String),
}

//! Evaluation and analysis: pairwise accuracy, rank correlations, L1,
//! human-consistency baselines, review-dimension and citation-versus-review
//! correlations, and tournament ranking.

mod analysis;
mod corr;
mod pairwise;
mod ranking;
mod report;

pub use analysis::{
    citation_review_correlation, human_consistency, review_dimension_correlations,
    CitationReviewCorrelation, CorpusFilter, DimensionMatrix, HumanConsistency,
};
pub use corr::{average_ranks, l1_distance, pearson, spearman};
pub use pairwise::{pairwise_accuracy, PairwiseAccuracy, DEFAULT_MAX_PAIRS};
pub use ranking::{
    check_coherence, round_robin_rank, swiss_rank, CoherenceReport, Comparator, Ranking,
    ScoreComparator, Standing,
};
pub use report::{
    evaluate_model, heatmap_svg, report_table, summary_row, summary_table, text_table, MetricReport,
};

use crate::scoremodel::ScoreModelError;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("zero variance; correlation undefined")]
    ZeroVariance,
    #[error("no pair with distinct targets")]
    NoValidPairs,
    #[error("need at least 2 submissions with 3 or more scored reviews, got {0}")]
    InsufficientSubmissions(usize),
    #[error("{0} has no target")]
    MissingTarget(String),
    #[error(transparent)]
    Model(#[from] ScoreModelError),
}

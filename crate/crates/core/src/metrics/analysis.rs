use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pearson, MetricsError};
use crate::corpus::{Decision, PaperRecord, ReviewDimension, YearMonth};
use crate::harmonize::{mean_review_score, record_citation_target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanConsistency {
    pub rho: f64,
    /// Submissions with at least three reviews carrying the attribute.
    pub submissions: usize,
    pub seed: u64,
}

/// Leave-one-review-out agreement: for each submission with at least three
/// scored reviews, hold out one review at random and correlate the held-out
/// scores with the means of the remaining ones.
pub fn human_consistency(
    records: &[PaperRecord],
    attribute: ReviewDimension,
    seed: u64,
) -> Result<HumanConsistency, MetricsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut held, mut rest) = (Vec::new(), Vec::new());
    for r in records {
        let scores: Vec<f64> = r
            .reviews
            .iter()
            .filter_map(|rv| rv.get(attribute))
            .collect();
        if scores.len() < 3 {
            continue;
        }
        let k = rng.random_range(0..scores.len());
        let others: f64 = scores
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, v)| v)
            .sum();
        held.push(scores[k]);
        rest.push(others / (scores.len() - 1) as f64);
    }
    if held.len() < 2 {
        return Err(MetricsError::InsufficientSubmissions(held.len()));
    }
    Ok(HumanConsistency {
        rho: pearson(&held, &rest)?,
        submissions: held.len(),
        seed,
    })
}

/// Pairwise-complete Pearson correlations between review dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionMatrix {
    pub dimensions: Vec<ReviewDimension>,
    /// `None` where fewer than two co-present values exist or a column is
    /// constant.
    pub rho: Vec<Vec<Option<f64>>>,
    pub n: Vec<Vec<usize>>,
}

pub fn review_dimension_correlations(records: &[PaperRecord]) -> DimensionMatrix {
    let dims = ReviewDimension::ALL.to_vec();
    let k = dims.len();
    let mut rho = vec![vec![None; k]; k];
    let mut n = vec![vec![0; k]; k];
    let reviews: Vec<_> = records.iter().flat_map(|r| &r.reviews).collect();
    for a in 0..k {
        for b in a..k {
            let (xs, ys): (Vec<f64>, Vec<f64>) = reviews
                .iter()
                .filter_map(|rv| Some((rv.get(dims[a])?, rv.get(dims[b])?)))
                .unzip();
            n[a][b] = xs.len();
            n[b][a] = xs.len();
            let cell = if a == b {
                (xs.len() >= 2).then_some(1.0)
            } else {
                pearson(&xs, &ys).ok()
            };
            rho[a][b] = cell;
            rho[b][a] = cell;
        }
    }
    DimensionMatrix {
        dimensions: dims,
        rho,
        n,
    }
}

/// Restricts the citation-versus-review analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusFilter {
    pub venue: Option<String>,
    pub year: Option<i32>,
    /// Keep papers published strictly before this year.
    pub before_year: Option<i32>,
    pub field_of_study: Option<String>,
}

impl CorpusFilter {
    pub fn matches(&self, r: &PaperRecord) -> bool {
        self.venue
            .as_ref()
            .is_none_or(|v| r.venue.eq_ignore_ascii_case(v))
            && self.year.is_none_or(|y| r.publication_date.year == y)
            && self.before_year.is_none_or(|y| r.publication_date.year < y)
            && self.field_of_study.as_ref().is_none_or(|f| {
                r.field_of_study
                    .as_ref()
                    .is_some_and(|fs| fs.iter().any(|x| x.eq_ignore_ascii_case(f)))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CitationReviewCorrelation {
    pub n: usize,
    pub rho: f64,
}

/// Pearson correlation between the citation target and the mean overall
/// review score over accepted papers with at least one citation.
pub fn citation_review_correlation(
    records: &[PaperRecord],
    filter: &CorpusFilter,
    snapshot: YearMonth,
) -> Result<CitationReviewCorrelation, MetricsError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| filter.matches(r))
        .filter(|r| r.decision == Some(Decision::Accepted) && r.citation_count.unwrap_or(0) >= 1)
        .filter_map(|r| {
            Some((
                record_citation_target(r, snapshot)?,
                mean_review_score(r, ReviewDimension::Score)?,
            ))
        })
        .unzip();
    if xs.len() < 2 {
        return Err(MetricsError::TooFewItems(xs.len()));
    }
    Ok(CitationReviewCorrelation {
        n: xs.len(),
        rho: pearson(&xs, &ys)?,
    })
}

use serde::{Deserialize, Serialize};

use super::HarmonizeError;
use crate::corpus::{Corpus, PaperRecord, ReviewDimension, YearMonth};

/// `ln(1 + citations / months)`: log of the average citations per month,
/// smoothed so that uncited papers map to 0.
pub fn citation_target(citation_count: u64, months_elapsed: u32) -> Result<f64, HarmonizeError> {
    if months_elapsed == 0 {
        return Err(HarmonizeError::ZeroMonths);
    }
    Ok((citation_count as f64 / months_elapsed as f64).ln_1p())
}

/// Citation target of a record relative to a snapshot date; `None` without
/// a citation count.
pub fn record_citation_target(record: &PaperRecord, snapshot: YearMonth) -> Option<f64> {
    let c = record.citation_count?;
    let months = record.publication_date.months_until(snapshot);
    citation_target(c, months).ok()
}

/// Mean of `dim` over the reviews that carry it.
pub fn mean_review_score(record: &PaperRecord, dim: ReviewDimension) -> Option<f64> {
    let (sum, n) = record
        .reviews
        .iter()
        .filter_map(|r| r.get(dim))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            validation_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, HarmonizeError> {
        let s = Self {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarmonizeError> {
        let fr = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        if fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(HarmonizeError::InvalidSplit(fr));
        }
        Ok(())
    }

    /// Partition sizes for `n` items: floor each share, then hand out the
    /// remainder by largest fractional part (earlier splits win ties).
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let fr = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        let exact: Vec<f64> = fr.iter().map(|f| f * n as f64).collect();
        let mut sizes = [0usize; 3];
        for i in 0..3 {
            sizes[i] = (exact[i] + 1e-9).floor() as usize;
        }
        let mut rest = n - sizes.iter().sum::<usize>().min(n);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - sizes[a] as f64;
            let fb = exact[b] - sizes[b] as f64;
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for i in order.into_iter().cycle() {
            if rest == 0 {
                break;
            }
            sizes[i] += 1;
            rest -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Sorts by publication date (ties by id) and cuts contiguous
/// train/validation/test blocks, so test holds the newest papers.
pub fn temporal_split(
    records: &[PaperRecord],
    spec: &SplitSpec,
) -> Result<TemporalSplit, HarmonizeError> {
    spec.validate()?;
    if records.is_empty() {
        return Err(HarmonizeError::EmptyCorpus);
    }
    let mut order: Vec<&PaperRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        a.publication_date
            .cmp(&b.publication_date)
            .then_with(|| a.id.cmp(&b.id))
    });
    let [a, b, _] = spec.sizes(order.len());
    let ids: Vec<String> = order.into_iter().map(|r| r.id.clone()).collect();
    Ok(TemporalSplit {
        train: ids[..a].to_vec(),
        validation: ids[a..a + b].to_vec(),
        test: ids[a + b..].to_vec(),
    })
}

pub fn temporal_split_corpus(
    corpus: &Corpus,
    spec: &SplitSpec,
) -> Result<TemporalSplit, HarmonizeError> {
    temporal_split(corpus.records(), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ReviewRecord;

    #[test]
    fn citation_target_values() {
        assert_eq!(citation_target(0, 7).unwrap(), 0.0);
        assert!((citation_target(12, 12).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((citation_target(120, 12).unwrap() - 11f64.ln()).abs() < 1e-12);
        assert!(matches!(
            citation_target(3, 0),
            Err(HarmonizeError::ZeroMonths)
        ));
    }

    #[test]
    fn citation_target_monotonicity() {
        for m in 1..40 {
            let mut prev = citation_target(0, m).unwrap();
            for c in 1..200 {
                let t = citation_target(c, m).unwrap();
                assert!(t > prev && t > 0.0);
                prev = t;
            }
            assert!(citation_target(5, m + 1).unwrap() < citation_target(5, m).unwrap());
        }
    }

    fn with_scores(scores: &[Option<f64>]) -> PaperRecord {
        let mut r = PaperRecord::new("x", "t", "v", YearMonth::new(2020, 1));
        for s in scores {
            r.reviews.push(ReviewRecord {
                text_review: "r".into(),
                score: *s,
                ..Default::default()
            });
        }
        r
    }

    #[test]
    fn mean_review_score_cases() {
        let r = with_scores(&[Some(0.2), Some(0.4), None]);
        assert!((mean_review_score(&r, ReviewDimension::Score).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(mean_review_score(&r, ReviewDimension::Impact), None);
        assert_eq!(
            mean_review_score(&with_scores(&[Some(0.7)]), ReviewDimension::Score),
            Some(0.7)
        );
    }

    fn dated(id: &str, y: i32, m: u32) -> PaperRecord {
        PaperRecord::new(id, "t", "v", YearMonth::new(y, m))
    }

    #[test]
    fn ten_records_eighty_ten_ten() {
        let recs: Vec<_> = (0..10)
            .map(|i| dated(&format!("p{i}"), 2010 + i, 1))
            .collect();
        let s = temporal_split(&recs, &SplitSpec::new(0.8, 0.1, 0.1).unwrap()).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s.test, ["p9"]);
    }

    #[test]
    fn three_records_one_each() {
        let recs: Vec<_> = (0..3)
            .map(|i| dated(&format!("p{i}"), 2020, 1 + i as u32))
            .collect();
        let s = temporal_split(&recs, &SplitSpec::new(0.34, 0.33, 0.33).unwrap()).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1, 1, 1));
    }

    #[test]
    fn same_month_ties_use_id_order() {
        let recs: Vec<_> = ["c", "a", "d", "b"]
            .iter()
            .map(|id| dated(id, 2021, 5))
            .collect();
        let spec = SplitSpec::new(0.5, 0.25, 0.25).unwrap();
        let s1 = temporal_split(&recs, &spec).unwrap();
        let mut rev = recs.clone();
        rev.reverse();
        let s2 = temporal_split(&rev, &spec).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.train, ["a", "b"]);
    }

    #[test]
    fn empty_corpus_and_bad_fractions_rejected() {
        assert!(matches!(
            temporal_split(&[], &SplitSpec::default()),
            Err(HarmonizeError::EmptyCorpus)
        ));
        assert!(SplitSpec::new(0.5, 0.5, 0.0).is_err());
        assert!(SplitSpec::new(0.5, 0.3, 0.3).is_err());
    }

    #[test]
    fn split_sizes_always_sum_to_n() {
        let spec = SplitSpec::default();
        for n in 0..500 {
            assert_eq!(spec.sizes(n).iter().sum::<usize>(), n);
        }
    }
}

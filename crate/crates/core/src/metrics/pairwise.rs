use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;

pub const DEFAULT_MAX_PAIRS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseAccuracy {
    pub accuracy: f64,
    /// Pairs with distinct targets that entered the average.
    pub n_pairs: usize,
}

/// Fraction of target-ordered pairs that the scores order the same way.
/// Score ties count one half. All non-tied pairs are used when there are
/// at most `max_pairs` pairs in total; otherwise `max_pairs` non-tied pairs
/// are drawn uniformly with `seed`.
pub fn pairwise_accuracy(
    scores: &[f64],
    targets: &[f64],
    seed: u64,
    max_pairs: usize,
) -> Result<PairwiseAccuracy, MetricsError> {
    if scores.len() != targets.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), targets.len()));
    }
    let n = scores.len();
    if n < 2 {
        return Err(MetricsError::TooFewItems(n));
    }
    if scores.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let credit = |i: usize, j: usize| -> f64 {
        let ds = scores[i] - scores[j];
        let dt = targets[i] - targets[j];
        if ds == 0.0 {
            0.5
        } else if (ds > 0.0) == (dt > 0.0) {
            1.0
        } else {
            0.0
        }
    };
    let total_pairs = n * (n - 1) / 2;
    let (mut sum, mut count) = (0.0, 0usize);
    if total_pairs <= max_pairs {
        for i in 0..n {
            for j in i + 1..n {
                if targets[i] != targets[j] {
                    sum += credit(i, j);
                    count += 1;
                }
            }
        }
    } else {
        if targets.iter().all(|t| *t == targets[0]) {
            return Err(MetricsError::NoValidPairs);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while count < max_pairs {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || targets[i] == targets[j] {
                continue;
            }
            sum += credit(i, j);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::NoValidPairs);
    }
    Ok(PairwiseAccuracy {
        accuracy: sum / count as f64,
        n_pairs: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_constant_models() {
        let t: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        assert_eq!(
            pairwise_accuracy(&t, &t, 0, DEFAULT_MAX_PAIRS)
                .unwrap()
                .accuracy,
            1.0
        );
        let c = vec![0.3; 30];
        let r = pairwise_accuracy(&c, &t, 0, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.n_pairs, 435);
        // sampled path
        let r = pairwise_accuracy(&c, &t, 1, 100).unwrap();
        assert_eq!((r.accuracy, r.n_pairs), (0.5, 100));
    }

    #[test]
    fn tied_targets_are_excluded() {
        let r = pairwise_accuracy(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0], 0, 10).unwrap();
        assert_eq!(r.n_pairs, 2);
        assert_eq!(r.accuracy, 1.0);
        assert!(matches!(
            pairwise_accuracy(&[1.0, 2.0], &[5.0, 5.0], 0, 10),
            Err(MetricsError::NoValidPairs)
        ));
        assert!(matches!(
            pairwise_accuracy(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0], 0, 1),
            Err(MetricsError::NoValidPairs)
        ));
    }

    proptest! {
        #[test]
        fn model_and_negation_sum_to_one(
            scores in prop::collection::vec(-5.0f64..5.0, 2..60),
            seed in any::<u64>(),
            max_pairs in 1usize..2000,
        ) {
            let targets: Vec<f64> = (0..scores.len()).map(|i| i as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = pairwise_accuracy(&scores, &targets, seed, max_pairs).unwrap();
            let b = pairwise_accuracy(&neg, &targets, seed, max_pairs).unwrap();
            prop_assert_eq!(a.n_pairs, b.n_pairs);
            prop_assert!((a.accuracy + b.accuracy - 1.0).abs() < 1e-12);
        }
    }
}

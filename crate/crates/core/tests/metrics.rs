use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdq_core::metrics::{pairwise_accuracy, pearson, spearman, DEFAULT_MAX_PAIRS};

/// Textbook Pearson: covariance over the product of standard deviations,
/// each computed in its own pass.
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

/// Rank of each value by counting: smaller values plus the midpoint of the
/// tie block.
fn ranks_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Spearman for distinct values: `1 − 6 Σd² / (n(n² − 1))`.
fn spearman_distinct_oracle(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks_oracle(x), ranks_oracle(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn correlations_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.random_range(2..120);
        let slope = rng.random_range(-2.0..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| slope * v + rng.random_range(-10.0..10.0))
            .collect();
        let p = pearson(&x, &y).unwrap();
        let s = spearman(&x, &y).unwrap();
        worst = worst.max((p - pearson_oracle(&x, &y)).abs());
        worst = worst.max((s - spearman_distinct_oracle(&x, &y)).abs());
        // tied integer data through the counting rank oracle
        let xi: Vec<f64> = x.iter().map(|v| (v / 4.0).round()).collect();
        let yi: Vec<f64> = y.iter().map(|v| (v / 4.0).round()).collect();
        match spearman(&xi, &yi) {
            Ok(s) => {
                let o = pearson_oracle(&ranks_oracle(&xi), &ranks_oracle(&yi));
                worst = worst.max((s - o).abs());
            }
            Err(_) => assert!(
                xi.iter().all(|v| *v == xi[0]) || yi.iter().all(|v| *v == yi[0]),
                "pair {k}"
            ),
        }
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
}

#[test]
fn constant_model_scores_exactly_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [2usize, 10, 500, 1000] {
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let scores = vec![0.25; n];
        let exhaustive = pairwise_accuracy(&scores, &targets, 3, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(exhaustive.accuracy, 0.5);
        let sampled = pairwise_accuracy(&scores, &targets, 3, 1000).unwrap();
        assert_eq!(sampled.accuracy, 0.5);
    }
}

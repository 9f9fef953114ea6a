use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScoreModelError;

/// Binary cross-entropy of `σ(f1 − f2)` against `x`, computed from the
/// logit so it stays finite for any finite input.
pub fn pairwise_loss(f1: f64, f2: f64, x: f64) -> f64 {
    let d = f1 - f2;
    // softplus(d) - x*d, with softplus written stably
    d.max(0.0) - x * d + (-d.abs()).exp().ln_1p()
}

/// `∂loss/∂f1`; the derivative with respect to `f2` is its negation.
pub fn pairwise_loss_grad(f1: f64, f2: f64, x: f64) -> f64 {
    sigmoid(f1 - f2) - x
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn regression_loss(pred: f64, target: f64) -> f64 {
    (pred - target).abs()
}

/// Subgradient of the L1 loss, 0 at the kink.
pub fn regression_loss_grad(pred: f64, target: f64) -> f64 {
    let d = pred - target;
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    /// 1 when item `i` has the higher target.
    pub x: f64,
}

/// Draws `count` random pairs of distinct indices (reported with `i < j`),
/// redrawing pairs whose targets tie.
pub fn make_pairs(targets: &[f64], seed: u64, count: usize) -> Result<Vec<Pair>, ScoreModelError> {
    if targets.len() < 2 {
        return Err(ScoreModelError::TooFewExamples(targets.len()));
    }
    if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(ScoreModelError::InvalidTarget(*bad));
    }
    if targets.iter().all(|t| *t == targets[0]) {
        return Err(ScoreModelError::AllTargetsEqual);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = targets.len();
    let mut out = Vec::with_capacity(count);
    let limit = count.saturating_mul(1000).max(1000);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > limit {
            return Err(ScoreModelError::AllTargetsEqual);
        }
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (a.min(b), a.max(b));
        if targets[i] == targets[j] {
            continue;
        }
        out.push(Pair {
            i,
            j,
            x: if targets[i] > targets[j] { 1.0 } else { 0.0 },
        });
    }
    Ok(out)
}

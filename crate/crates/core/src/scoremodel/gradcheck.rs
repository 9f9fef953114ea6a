//! Finite-difference verification of the full training objectives.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::make_pairs;
use super::model::{EmbeddedExample, ScoreModel};
use super::train::{loss_and_gradient, objective_loss_with_pattern, Objective, Work};
use super::{ModelSpec, ScoreModelError};
use crate::nn::{relative_error, ParamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckSetup {
    /// Odd by default: with an even count the mean L1 subgradient of the
    /// output bias can cancel to exactly zero, where the difference quotient
    /// is pure rounding noise.
    pub examples: usize,
    /// Context lengths are drawn from `0..=max_context`.
    pub max_context: usize,
    pub dropout: f64,
    pub eps: f64,
    /// Coordinates sampled per parameter tensor; `None` checks all.
    pub samples_per_tensor: Option<usize>,
}

impl Default for GradientCheckSetup {
    fn default() -> Self {
        Self {
            examples: 7,
            max_context: 3,
            dropout: 0.3,
            eps: 1e-4,
            samples_per_tensor: None,
        }
    }
}

/// Extra coordinates drawn per tensor to replace ones whose stencil
/// crosses a kink.
const KINK_RESERVE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveGradReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates left out because `θ ± ε` changed the sign of a ReLU
    /// input or of an L1 residual, where the objective has no derivative.
    pub kink_crossings: usize,
}

/// Builds a random model and batch from `seed`, then compares the analytic
/// gradient of the mean objective with central differences in f64. Dropout
/// masks are replayed identically for every loss evaluation. Coordinates
/// whose stencil crosses a non-differentiable point are replaced by fresh
/// draws (sampled mode) or skipped (exhaustive mode), and counted.
pub fn check_objective_gradients(
    spec: &ModelSpec,
    objective: Objective,
    seed: u64,
    setup: &GradientCheckSetup,
) -> Result<ObjectiveGradReport, ScoreModelError> {
    let mut model = ScoreModel::<f64>::new(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let d = spec.dims.input;
    let vector = |rng: &mut ChaCha8Rng| {
        (0..d)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect::<Vec<_>>()
    };
    let set: Vec<EmbeddedExample> = (0..setup.examples.max(2))
        .map(|i| {
            let paper = vector(&mut rng);
            let k = if spec.context_kind == super::ContextKind::None {
                0
            } else {
                rng.random_range(0..=setup.max_context)
            };
            let ctx = (0..k).map(|_| vector(&mut rng)).collect();
            EmbeddedExample::new(format!("g{i}"), spec.provider_id.clone(), paper)
                .with_context(ctx)
                .with_target(rng.random_range(-2.0..2.0))
        })
        .collect();
    let targets: Vec<f64> = set.iter().map(|e| e.target.unwrap()).collect();
    let pairs = make_pairs(&targets, seed, set.len())?;
    let items: Vec<usize> = (0..set.len()).collect();
    let work = match objective {
        Objective::Pairwise => Work::Pairs(&pairs),
        Objective::Regression => Work::Items(&items),
    };
    let mask_seed = seed ^ 0xd0;
    let (_, grads) = loss_and_gradient(
        &model,
        &set,
        work,
        setup.dropout,
        &mut ChaCha8Rng::seed_from_u64(mask_seed),
    )?;

    let eval = |m: &ScoreModel<f64>| {
        objective_loss_with_pattern(
            m,
            &set,
            work,
            setup.dropout,
            &mut ChaCha8Rng::seed_from_u64(mask_seed),
        )
    };
    let (_, base_pattern) = eval(&model)?;
    let ids: Vec<ParamId> = model.params.ids().collect();
    let mut report = ObjectiveGradReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
        kink_crossings: 0,
    };
    for id in ids {
        let n = model.params.value(id).len();
        let mut queue: Vec<usize> = match setup.samples_per_tensor {
            None => (0..n).collect(),
            Some(k) => sample(&mut rng, n, n.min(k + KINK_RESERVE)).into_vec(),
        };
        let wanted = setup.samples_per_tensor.map_or(n, |k| k.min(n));
        let mut done = 0;
        queue.reverse();
        while done < wanted {
            let Some(i) = queue.pop() else { break };
            let orig = model.params.value(id)[i];
            model.params.value_mut(id)[i] = orig + setup.eps;
            let (up, up_pattern) = eval(&model)?;
            model.params.value_mut(id)[i] = orig - setup.eps;
            let (down, down_pattern) = eval(&model)?;
            model.params.value_mut(id)[i] = orig;
            if up_pattern != base_pattern || down_pattern != base_pattern {
                report.kink_crossings += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * setup.eps);
            let err = relative_error(grads.get(id)[i], numeric);
            done += 1;
            report.checked += 1;
            if report.checked == 1 || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = model.params.params()[id.0].name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

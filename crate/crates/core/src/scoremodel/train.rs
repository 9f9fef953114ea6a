use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{
    make_pairs, pairwise_loss, pairwise_loss_grad, regression_loss, regression_loss_grad, Pair,
};
use super::model::{EmbeddedExample, ModelKind, ModelSpec, ScoreModel};
use super::ScoreModelError;
use crate::nn::{AdamConfig, Grads, NnError, Real};
use crate::util::{fnv1a64, map_shards, splitmix64, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Pairwise,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub objective: Objective,
    /// Pairs drawn per epoch; defaults to the training set size.
    pub pairs_per_epoch: Option<usize>,
    /// Examples (or pairs) per gradient shard. Shards are reduced in a
    /// fixed order, so results do not depend on the thread count.
    pub shard_size: usize,
    pub grid_learning_rates: Vec<f64>,
    pub grid_dropouts: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_kind(ModelKind::NoContext)
    }
}

impl TrainConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        let (epochs, batch_size) = match kind {
            ModelKind::NoContext => (100, 256),
            ModelKind::Context => (50, 128),
        };
        Self {
            learning_rate: 5e-5,
            dropout: 0.3,
            epochs,
            batch_size,
            seed: 0,
            objective: Objective::Pairwise,
            pairs_per_epoch: None,
            shard_size: 64,
            grid_learning_rates: vec![1e-4, 1e-3, 5e-4, 5e-5],
            grid_dropouts: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }

    pub fn validate(&self) -> Result<(), ScoreModelError> {
        let bad = |m: String| Err(ScoreModelError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size == 0 || self.shard_size == 0 {
            return bad("batch and shard sizes must be positive".into());
        }
        if self.pairs_per_epoch == Some(0) {
            return bad("pairs_per_epoch must be positive".into());
        }
        Ok(())
    }

    /// Stable hash of the configuration, recorded in checkpoints.
    pub fn config_hash(&self) -> String {
        format!(
            "{:016x}",
            fnv1a64(serde_json::to_string(self).expect("serializes").as_bytes())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the lowest validation loss (earliest on ties).
    pub model: ScoreModel<f32>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> std::io::Result<()> {
    crate::util::write_atomic(path, |w| {
        for r in history {
            writeln!(w, "{}", serde_json::to_string(r).expect("serializes"))?;
        }
        Ok(())
    })
}

fn targets(set: &[EmbeddedExample]) -> Result<Vec<f64>, ScoreModelError> {
    set.iter()
        .map(|e| {
            e.target
                .ok_or_else(|| ScoreModelError::MissingTarget(e.paper_id.clone()))
        })
        .collect()
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    splitmix64(seed ^ splitmix64(epoch as u64 + 1))
}

const VALIDATION_SALT: u64 = 0x7661_6c69_6461_7465;

/// Validation pairs, fixed for the whole run.
pub fn validation_pairs(val: &[EmbeddedExample], seed: u64) -> Result<Vec<Pair>, ScoreModelError> {
    make_pairs(
        &targets(val)?,
        splitmix64(seed ^ VALIDATION_SALT),
        val.len(),
    )
}

/// Mean loss in inference mode.
pub fn evaluate_loss(
    model: &ScoreModel<f32>,
    set: &[EmbeddedExample],
    objective: Objective,
    pairs: &[Pair],
) -> Result<f64, ScoreModelError> {
    let refs: Vec<&EmbeddedExample> = set.iter().collect();
    let scores = model.predict_batch(&refs)?;
    let t = targets(set)?;
    let loss = match objective {
        Objective::Pairwise => {
            pairs
                .iter()
                .map(|p| pairwise_loss(scores[p.i], scores[p.j], p.x))
                .sum::<f64>()
                / pairs.len() as f64
        }
        Objective::Regression => {
            scores
                .iter()
                .zip(&t)
                .map(|(s, t)| regression_loss(*s, *t))
                .sum::<f64>()
                / t.len() as f64
        }
    };
    Ok(loss)
}

/// The units one gradient evaluation runs over: labelled pairs for the
/// pairwise objective, example indices for regression.
#[derive(Debug, Clone, Copy)]
pub enum Work<'a> {
    Pairs(&'a [Pair]),
    Items(&'a [usize]),
}

impl Work<'_> {
    pub fn len(&self) -> usize {
        match self {
            Work::Pairs(p) => p.len(),
            Work::Items(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean loss over `work` and its gradient, in training mode with dropout
/// masks drawn from `rng`.
pub fn loss_and_gradient<T: Real>(
    model: &ScoreModel<T>,
    set: &[EmbeddedExample],
    work: Work<'_>,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Grads<T>), ScoreModelError> {
    let t = targets(set)?;
    let (sum, grads) = shard_gradient(model, set, &t, work, work.len(), dropout, rng)?;
    Ok((sum / work.len() as f64, grads))
}

fn gather<'a>(set: &'a [EmbeddedExample], work: Work<'_>) -> Vec<&'a EmbeddedExample> {
    match work {
        Work::Pairs(pairs) => pairs
            .iter()
            .map(|p| &set[p.i])
            .chain(pairs.iter().map(|p| &set[p.j]))
            .collect(),
        Work::Items(idx) => idx.iter().map(|&i| &set[i]).collect(),
    }
}

/// Loss sum over `work` given the gathered scores, and `∂(loss/scale)/∂score`.
fn score_losses<T: Real>(s: &[T], targets: &[f64], work: Work<'_>, scale: f64) -> (f64, Vec<T>) {
    let mut d = vec![T::zero(); s.len()];
    let mut loss = 0.0;
    match work {
        Work::Pairs(pairs) => {
            let m = pairs.len();
            for (k, p) in pairs.iter().enumerate() {
                let (f1, f2) = (s[k].as_f64(), s[m + k].as_f64());
                loss += pairwise_loss(f1, f2, p.x);
                let g = pairwise_loss_grad(f1, f2, p.x) * scale;
                d[k] = T::of(g);
                d[m + k] = T::of(-g);
            }
        }
        Work::Items(idx) => {
            for (k, &i) in idx.iter().enumerate() {
                let p = s[k].as_f64();
                loss += regression_loss(p, targets[i]);
                d[k] = T::of(regression_loss_grad(p, targets[i]) * scale);
            }
        }
    }
    (loss, d)
}

/// Mean loss over `work` in training mode, without a backward pass.
pub fn objective_loss<T: Real>(
    model: &ScoreModel<T>,
    set: &[EmbeddedExample],
    work: Work<'_>,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ScoreModelError> {
    Ok(objective_loss_with_pattern(model, set, work, dropout, rng)?.0)
}

/// Mean loss together with the sign pattern of every non-smooth point of
/// the objective: ReLU pre-activations and, for regression, residuals.
pub(crate) fn objective_loss_with_pattern<T: Real>(
    model: &ScoreModel<T>,
    set: &[EmbeddedExample],
    work: Work<'_>,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<bool>), ScoreModelError> {
    let t = targets(set)?;
    let (s, cache) = model.forward_batch(&gather(set, work), dropout, rng, true)?;
    let mut pattern = cache.relu_pattern();
    if let Work::Items(idx) = work {
        pattern.extend(idx.iter().enumerate().map(|(k, &i)| s[k].as_f64() > t[i]));
    }
    Ok((
        score_losses(&s, &t, work, 1.0).0 / work.len() as f64,
        pattern,
    ))
}

/// Loss sum and gradient for one shard, scaled by `1/batch_len`.
fn shard_gradient<T: Real>(
    model: &ScoreModel<T>,
    set: &[EmbeddedExample],
    targets: &[f64],
    work: Work<'_>,
    batch_len: usize,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Grads<T>), ScoreModelError> {
    let (s, cache) = model.forward_batch(&gather(set, work), dropout, rng, true)?;
    let (loss, d) = score_losses(&s, targets, work, 1.0 / batch_len as f64);
    let mut grads = model.params.zero_grads_like();
    model.backward_batch(&cache, &d, &mut grads)?;
    Ok((loss, grads))
}

/// Trains for the full epoch budget and keeps the parameters with the
/// lowest validation loss.
pub fn train(
    model: ScoreModel<f32>,
    train_set: &[EmbeddedExample],
    val_set: &[EmbeddedExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ScoreModelError> {
    cfg.validate()?;
    for ex in train_set.iter().chain(val_set) {
        model.check_example(ex)?;
    }
    let train_ids: std::collections::HashSet<&str> =
        train_set.iter().map(|e| e.paper_id.as_str()).collect();
    if let Some(dup) = val_set
        .iter()
        .find(|e| train_ids.contains(e.paper_id.as_str()))
    {
        return Err(ScoreModelError::OverlappingSplits(dup.paper_id.clone()));
    }
    let train_t = targets(train_set)?;
    targets(val_set)?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            history: Vec::new(),
            best_epoch: None,
            best_val_loss: None,
        });
    }
    let val_pairs = match cfg.objective {
        Objective::Pairwise => validation_pairs(val_set, cfg.seed)?,
        Objective::Regression => {
            if val_set.is_empty() {
                return Err(ScoreModelError::TooFewExamples(0));
            }
            Vec::new()
        }
    };
    let mut model = model;
    let mut best = model.params.clone();
    let mut best_epoch = None;
    let mut best_val = f64::INFINITY;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let es = epoch_seed(cfg.seed, epoch);
        let pairs;
        let mut order: Vec<usize>;
        let units = match cfg.objective {
            Objective::Pairwise => {
                pairs = make_pairs(&train_t, es, cfg.pairs_per_epoch.unwrap_or(train_set.len()))?;
                order = Vec::new();
                pairs.len()
            }
            Objective::Regression => {
                pairs = Vec::new();
                order = (0..train_set.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(es));
                order.len()
            }
        };
        let mut total = 0.0;
        for (b, start) in (0..units).step_by(cfg.batch_size).enumerate() {
            let end = (start + cfg.batch_size).min(units);
            let len = end - start;
            let shards = len.div_ceil(cfg.shard_size);
            let (rseed, first) = model.params.reserve_rng_streams(shards as u64);
            let current = &model;
            let results = map_shards(shards, |k| {
                let lo = start + k * cfg.shard_size;
                let hi = (lo + cfg.shard_size).min(end);
                let work = match cfg.objective {
                    Objective::Pairwise => Work::Pairs(&pairs[lo..hi]),
                    Objective::Regression => Work::Items(&order[lo..hi]),
                };
                let mut rng = stream_rng(rseed, first + k as u64);
                shard_gradient(
                    current,
                    train_set,
                    &train_t,
                    work,
                    len,
                    cfg.dropout,
                    &mut rng,
                )
            });
            let non_finite = ScoreModelError::NonFinite { epoch, batch: b };
            let mut grads = model.params.zero_grads_like();
            for r in results {
                let (loss, g) = r.map_err(|e| match e {
                    ScoreModelError::Nn(NnError::NonFinite { .. }) => {
                        ScoreModelError::NonFinite { epoch, batch: b }
                    }
                    other => other,
                })?;
                total += loss;
                grads.add(&g);
            }
            if !total.is_finite() || grads.ensure_finite("gradient").is_err() {
                return Err(non_finite);
            }
            model.params.accumulate(&grads);
            model
                .params
                .adam_step(cfg.learning_rate, AdamConfig::default())
                .map_err(|e| match e {
                    NnError::NonFinite { .. } => ScoreModelError::NonFinite { epoch, batch: b },
                    other => other.into(),
                })?;
        }
        let train_loss = total / units.max(1) as f64;
        let val_loss =
            evaluate_loss(&model, val_set, cfg.objective, &val_pairs).map_err(|e| match e {
                ScoreModelError::Nn(NnError::NonFinite { .. }) => ScoreModelError::NonFinite {
                    epoch,
                    batch: units.div_ceil(cfg.batch_size),
                },
                other => other,
            })?;
        if !val_loss.is_finite() {
            return Err(ScoreModelError::NonFinite {
                epoch,
                batch: units.div_ceil(cfg.batch_size),
            });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = model.params.clone();
            best_epoch = Some(epoch);
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
    }
    model.params = best;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_loss: best_epoch.map(|_| best_val),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub dropout: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub best_learning_rate: f64,
    pub best_dropout: f64,
    pub best: TrainOutcome,
}

/// Trains every (learning rate, dropout) cell from the same seed and keeps
/// the lowest validation loss; ties go to the lower rate, then the lower
/// dropout. Failed cells are recorded and skipped.
pub fn grid_search(
    spec: &ModelSpec,
    train_set: &[EmbeddedExample],
    val_set: &[EmbeddedExample],
    cfg: &TrainConfig,
) -> Result<GridOutcome, ScoreModelError> {
    if cfg.grid_learning_rates.is_empty() || cfg.grid_dropouts.is_empty() {
        return Err(ScoreModelError::InvalidConfig("empty grid".into()));
    }
    let mut cells = Vec::new();
    let mut best: Option<(f64, f64, f64, TrainOutcome)> = None;
    for &lr in &cfg.grid_learning_rates {
        for &dropout in &cfg.grid_dropouts {
            let cell_cfg = TrainConfig {
                learning_rate: lr,
                dropout,
                ..cfg.clone()
            };
            let result = ScoreModel::<f32>::new(spec.clone(), cfg.seed)
                .and_then(|m| train(m, train_set, val_set, &cell_cfg));
            match result {
                Ok(out) => {
                    let loss = out.best_val_loss.unwrap_or(f64::INFINITY);
                    cells.push(GridCell {
                        learning_rate: lr,
                        dropout,
                        best_val_loss: out.best_val_loss,
                        best_epoch: out.best_epoch,
                        error: None,
                    });
                    let better = match &best {
                        None => true,
                        Some((bl, blr, bd, _)) => {
                            loss < *bl
                                || (loss == *bl && (lr < *blr || (lr == *blr && dropout < *bd)))
                        }
                    };
                    if better {
                        best = Some((loss, lr, dropout, out));
                    }
                }
                Err(e) => cells.push(GridCell {
                    learning_rate: lr,
                    dropout,
                    best_val_loss: None,
                    best_epoch: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    let (_, lr, dropout, out) = best.ok_or(ScoreModelError::AllCellsFailed(cells.len()))?;
    Ok(GridOutcome {
        cells,
        best_learning_rate: lr,
        best_dropout: dropout,
        best: out,
    })
}

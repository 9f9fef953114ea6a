//! Score models in both architectures, the pairwise and regression
//! objectives, training with validation checkpointing, and grid search.

mod dataset;
mod gradcheck;
mod loss;
mod model;
mod train;

pub use dataset::{
    build_examples, context_texts, representation_text, target_value, ExampleBuildReport,
};
pub use gradcheck::{check_objective_gradients, GradientCheckSetup, ObjectiveGradReport};
pub use loss::{
    make_pairs, pairwise_loss, pairwise_loss_grad, regression_loss, regression_loss_grad, sigmoid,
    Pair,
};
pub use model::{
    CheckpointHeader, ContextKind, EmbeddedExample, ModelDims, ModelKind, ModelSpec,
    RepresentationKind, ScoreModel, TargetKind,
};
pub use train::{
    evaluate_loss, grid_search, loss_and_gradient, objective_loss, train, validation_pairs,
    write_history, EpochRecord, GridCell, GridOutcome, Objective, TrainConfig, TrainOutcome, Work,
};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum ScoreModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("example embedded by {example}, model expects {model}")]
    ProviderMismatch { model: String, example: String },
    #[error("{paper_id}: embedding dimension {got}, expected {expected}")]
    Dimension {
        paper_id: String,
        expected: usize,
        got: usize,
    },
    #[error("{0} has no target")]
    MissingTarget(String),
    #[error("target {0} is not finite")]
    InvalidTarget(f64),
    #[error("need at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("all targets are equal; no training pair can be formed")]
    AllTargetsEqual,
    #[error("{0} appears in both training and validation sets")]
    OverlappingSplits(String),
    #[error("non-finite loss or gradient at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("all {0} grid cells failed")]
    AllCellsFailed(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

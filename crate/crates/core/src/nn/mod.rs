//! Dense numerical layer: tensors, the MLP and encoder architectures with
//! hand-written backward passes, dropout, Adam and finite-difference checks.

pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use layers::{
    dropout, dropout_mask, EncoderCache, EncoderConfig, EncoderLayer, LayerNorm, Linear, Mlp,
    MlpCache, SelfAttention,
};
pub use params::{AdamConfig, Grads, ParamId, ParamSet};
pub use tensor::{Real, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("dropout rate must be in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

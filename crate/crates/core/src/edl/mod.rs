//! Evidential deep learning: Dirichlet outputs, the annealed evidential loss
//! and a small one-hidden-layer classifier trained by gradient descent.

mod dirichlet;
mod loss;
mod model;
mod special;
mod train;

pub use dirichlet::{dirichlet_from_raw, kl_to_uniform, uncertainties, DirichletPrediction};
pub use loss::{annealing, edl_loss, loss_gradient, KlTarget, LossBreakdown, LossConfig, LossVariant, Sample};
pub use model::{EvidentialModel, ModelFile, MODEL_VERSION};
pub use special::trigamma;
pub use train::{train, TrainingOutcome, TrainingSchedule};

#[derive(Debug, thiserror::Error)]
pub enum EdlError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("concentration parameters must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("label is not one-hot: {0:?}")]
    NotOneHot(Vec<f64>),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("invalid training schedule: {0}")]
    Schedule(String),
    #[error("model file: {0}")]
    Format(String),
}

//! Shared-latent two-domain image translator.
//!
//! Two encoders map images from domains S1 and S2 into one latent space,
//! two generators map latents back into each domain, and two
//! discriminators judge whether an image belongs to their domain. A scene
//! `x` from S1 is moved to S2 by `G_2(E_1(x))`.

mod arch;
mod checkpoint;
mod losses;
mod objective;
mod params;
mod train;

use thiserror::Error;

use crate::dataset::{DatasetError, Domain};
use crate::nn::NnError;

pub use arch::{Architecture, OutputSquash};
pub use checkpoint::{Checkpoint, OptimizerState};
pub use losses::{bce_gan_losses, bce_gan_losses_from_logits, kl_to_unit_normal, kl_unit_variance, softplus, Distance};
pub use objective::{
    cycle_loss, gan_loss, objective_gradient, total_objective, vae_loss, LossBreakdown, LossWeights, Noise, Objective, ParamGrads, VaeTerms,
};
pub use params::{LatentCode, Slot, Translation, TranslatorParams};
pub use train::{train, train_from_manifests, write_training_log, LogRow, TrainConfig, TrainOutcome, Trainer};

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    Dimension { expected: Vec<usize>, got: Vec<usize> },
    #[error(transparent)]
    Network(#[from] NnError),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("no training images for domain {0}")]
    EmptyCorpus(Domain),
    #[error("training diverged at step {step}: {losses:?}")]
    Divergence { step: u64, losses: Box<LossBreakdown> },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint architecture {found:?} does not match expected {expected:?}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

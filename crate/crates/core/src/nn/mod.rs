//! Feed-forward VAE training: dense layers with manual backpropagation,
//! reparameterized ELBO for every observation family, Adam, He and
//! MLE-based initialization, checkpoints.

mod adam;
mod checkpoint;
mod elbo;
mod init;
mod layer;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use elbo::{elbo_minibatch, elbo_per_datum, evaluate, ElboEstimate};
pub use init::{init_bench, init_mle_b, init_mle_b_with, LogvarWeights, LOGVAR_FLOOR};
pub use layer::{Activation, Dense, DenseGrad, LayerSpec, EXP_CLAMP};
pub use model::{build_architecture, default_output_activation, Architecture, Gradients, VaeModel};
pub use train::{train, EvalRecord, TrainConfig, TrainHistory, INIT_STREAM};

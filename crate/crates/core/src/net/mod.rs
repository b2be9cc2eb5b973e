//! Block-causal transformer with a CVAE global latent.
//!
//! The condition prefix is a learned per-class sequence followed by one slot
//! holding `f(z)`; every layer also cross-attends to the class sequence. A
//! posterior encoder `q(z | x)` supplies `z` during training and the prior
//! `N(mu(class), I)` supplies it at inference.

mod checkpoint;
mod config;
mod decode;
pub mod gradcheck;
mod layers;
mod model;
mod optim;
mod params;
mod train;

pub use checkpoint::{load_ckpt, save_ckpt, Checkpoint, TrainState};
pub use config::ModelConfig;
pub use decode::StreamCache;
pub use layers::softmax;
pub use model::{
    cross_entropy, kl_to_unit_prior, loss, GaussianLatent, LossParts, Network, TrainOutput,
};
pub use optim::Adam;
pub use params::{BlockParams, ModelParams};
pub use train::{evaluate_ce, EpochMetrics, TrainConfig, Trainer};

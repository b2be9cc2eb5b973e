//! Semi-autoregressive image-token generation with L-shape parallel decoding.
//!
//! A square grid of `h x h` discrete tokens is generated in `h` steps. Step
//! `t` emits the `2t - 1` tokens of the mirrored-L block that extends the
//! top-left `(t-1) x (t-1)` square to `t x t`, all in parallel, conditioned
//! on everything generated so far.
//!
//! Module map:
//! - [`lgrid`]: block geometry and the L-order ranking of cells
//! - [`alignment`]: pad-aligned input sequence and block-causal mask
//! - [`net`]: the transformer, CVAE latent, training and checkpoints
//! - [`sampler`]: cached block-parallel decoding with top-k/top-p and CFG
//! - [`editing`]: repainting and bounding-box inpainting in token space
//! - [`complexity`]: attention multiplication counts and decode benchmarks
//! - [`corpus`]: token grids, synthetic datasets and grid files
//! - [`cli`]: the `lformer` command-line front end

pub mod alignment;
pub mod cli;
pub mod complexity;
pub mod corpus;
pub mod editing;
mod error;
pub mod lgrid;
pub mod net;
pub mod sampler;

pub use corpus::TokenGrid;
pub use error::{Error, Result};
pub use lgrid::{Cell, GridShape, LOrderLayout};

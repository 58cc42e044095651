//! Hierarchical B-frame neural video codec.
//!
//! A desk-scale bidirectional contextual video codec with temporal
//! layer-adaptive optimization. Frames are coded in a dyadic hierarchical
//! B structure: I-frames anchor each intra period and B-frames are coded
//! from two reconstructed references via learned motion and contextual
//! transforms. Two layer-adaptive mechanisms ride on top of the
//! bidirectional model: quality scaling picks a per-layer Lagrange
//! multiplier during training, and latent scaling divides latents by
//! learned per-layer channel vectors (plus a per-frame quantization
//! volume) before quantization.
//!
//! The crate is organized around the coding pipeline:
//!
//! - [`gop`]: dyadic schedules, temporal layers, training triplet lists.
//! - [`autograd`]: the f64 tape autodiff engine the networks run on.
//! - [`model`]: the codec networks (flow, motion codec, context
//!   generation, contextual codec, entropy parameter nets, intra codec).
//! - [`entropy`]: quantization, latent scaling, rate models, and the
//!   byte-oriented range coder producing real substreams.
//! - [`train`]: loss functions, triplet curriculum, two-stage training.
//! - [`eval`]: sequence encode/decode, PSNR, BD-rate, prediction analysis.
//! - [`container`]: the decodable on-disk bitstream format.

pub mod autograd;
pub mod container;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod gop;
pub mod model;
pub mod par;
pub mod train;

pub use error::{Error, Result};

//! Reverse-mode automatic differentiation over f64 tensors.
//!
//! Everything the codec networks need runs through a [`Tape`]: elementwise
//! arithmetic, channel broadcasts, GEMM-backed convolutions, transposed
//! convolutions, pixel shuffle, bilinear warping and resizing, reductions,
//! and the Gaussian CDF used by the rate model. Values are `ndarray`
//! arrays of f64; activations are `[C, H, W]`, convolution weights
//! `[Cout, Cin, kh, kw]`.
//!
//! A tape built with `recording = false` stores values but no backward
//! closures, which is the inference path used by the actual encoder and
//! decoder. Gradients flow to named parameters held in a [`ParamStore`];
//! each tape accumulates into a per-parameter gradient vector so that
//! independent tapes can run on worker threads and be reduced in a fixed
//! order afterwards.

pub mod adam;
pub mod conv;
pub mod graph;
pub mod nn;
pub mod ops;
pub mod params;
pub mod warp;

pub use adam::Adam;
pub use graph::{Grads, ParamGrads, Tape, Var};
pub use params::{ParamId, ParamStore};

//! Dual-task ECG learning: person identification and activity classification
//! from single-lead ECG windows.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: a small define-by-run reverse-mode engine over dense tensors.
//! - [`nn`]: convolution, batch norm, pooling, activation and loss layers plus
//!   the 1D residual block.
//! - [`sca`]: the sequence-channel attention gate.
//! - [`model`]: the two-headed network and its checkpoint format.
//! - [`dsp`]: high-pass / notch filtering, normalisation and segmentation.
//! - [`synthecg`]: a seeded synthetic ECG corpus with learnable identity and
//!   activity structure.
//! - [`train`]: Adam, GradNorm task weighting, the training loop and metrics.
//! - [`gradsuite`]: finite-difference checks over the whole op inventory.
//! - [`cli`]: configuration and the command implementations behind the binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autodiff;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod gradsuite;
pub mod model;
pub mod nn;
pub mod rng;
pub mod sca;
pub mod synthecg;
pub mod train;

pub use autodiff::{Scalar, Tensor};
pub use error::{Error, Result};

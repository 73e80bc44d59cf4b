//! Layers of the residual 1D-CNN backbone.
//!
//! Layers own their parameters as leaf [`Tensor`]s and run forward through the
//! ops in [`functional`], so every forward pass records a fresh graph.

pub mod functional;
mod layers;

pub use functional::{
    avg_pool_channel, avg_pool_time, batch_norm1d, conv1d, conv_out_len, cross_entropy,
    global_avg_pool, linear, relu, sigmoid, softmax, BatchMoments, BnStats,
};
pub use layers::{BatchNorm1dLayer, Conv1dLayer, LinearLayer, ResidualBlock1d};

use crate::autodiff::{Scalar, Tensor};

/// Forward-pass mode. Only batch norm behaves differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

/// Whether a named tensor is optimised or only carried as state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Param,
    /// Running statistics: saved in checkpoints, never touched by the optimizer.
    Buffer,
}

#[derive(Debug, Clone)]
pub struct NamedTensor<T: Scalar> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub role: Role,
}

/// Anything that owns named tensors.
pub trait Module<T: Scalar> {
    /// Append this module's tensors, names prefixed with `prefix`.
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>);

    fn named_tensors(&self) -> Vec<NamedTensor<T>> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn parameters(&self) -> Vec<Tensor<T>> {
        self.named_tensors()
            .into_iter()
            .filter(|n| n.role == Role::Param)
            .map(|n| n.tensor)
            .collect()
    }

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(Tensor::numel).sum()
    }

    fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

//! Reverse-mode automatic differentiation over dense row-major tensors.
//!
//! Graphs are built on the fly: every differentiable op returns a [`Tensor`]
//! that remembers its inputs and a backward rule. [`Tensor::backward`] walks
//! the graph once in reverse topological order and accumulates gradients into
//! leaf tensors; [`grad`] computes gradients for a chosen set of leaves without
//! touching their accumulators and without releasing the graph.

mod gradcheck;
mod graph;
pub(crate) mod linalg;
pub mod ops;
mod scalar;
mod tensor;

pub use gradcheck::{gradcheck, gradcheck_leaves, GradcheckReport, REL_ERR_FLOOR};
pub use graph::{grad, Graph};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Every differentiable operation the engine knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Mul,
    MulBroadcast,
    Scale,
    Sum,
    Mean,
    Relu,
    Sigmoid,
    Conv1d,
    BatchNorm1d,
    Linear,
    AvgPoolTime,
    AvgPoolChannel,
    GlobalAvgPool,
    Softmax,
    CrossEntropy,
}

impl OpKind {
    pub const ALL: [OpKind; 16] = [
        OpKind::Add,
        OpKind::Mul,
        OpKind::MulBroadcast,
        OpKind::Scale,
        OpKind::Sum,
        OpKind::Mean,
        OpKind::Relu,
        OpKind::Sigmoid,
        OpKind::Conv1d,
        OpKind::BatchNorm1d,
        OpKind::Linear,
        OpKind::AvgPoolTime,
        OpKind::AvgPoolChannel,
        OpKind::GlobalAvgPool,
        OpKind::Softmax,
        OpKind::CrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Mul => "mul",
            OpKind::MulBroadcast => "mul_broadcast",
            OpKind::Scale => "scale",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Relu => "relu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Conv1d => "conv1d",
            OpKind::BatchNorm1d => "batchnorm1d",
            OpKind::Linear => "linear",
            OpKind::AvgPoolTime => "avg_pool_time",
            OpKind::AvgPoolChannel => "avg_pool_channel",
            OpKind::GlobalAvgPool => "global_avg_pool",
            OpKind::Softmax => "softmax",
            OpKind::CrossEntropy => "cross_entropy",
        }
    }
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Backward rule of a recorded op.
///
/// `grad_out` has the shape of the op's output. The returned vector holds one
/// entry per input; entries for inputs with `needs[i] == false` may be `None`.
pub trait Backward<T: Scalar>: Send + Sync {
    fn kind(&self) -> OpKind;
    fn backward(&self, grad_out: &[T], inputs: &[Tensor<T>], needs: &[bool])
        -> Vec<Option<Vec<T>>>;
}

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use super::{Backward, OpKind, Scalar};
use crate::error::{Error, Result};

pub(crate) struct Node<T: Scalar> {
    pub op: Box<dyn Backward<T>>,
    pub inputs: Vec<Tensor<T>>,
}

struct Inner<T: Scalar> {
    shape: Vec<usize>,
    data: RwLock<Vec<T>>,
    grad: Mutex<Option<Vec<T>>>,
    requires_grad: bool,
    node: Mutex<Option<Arc<Node<T>>>>,
    released: AtomicBool,
}

/// Dense row-major tensor, cheaply clonable (clones share storage).
///
/// Leaf tensors created with [`Tensor::param`] carry a gradient accumulator of
/// their own shape. Tensors produced by ops on at least one gradient-requiring
/// input are linked into the graph.
pub struct Tensor<T: Scalar>(Arc<Inner<T>>);

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Arc::clone(&self.0))
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.0.data.read();
        let preview: Vec<_> = data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.op_kind())
            .field("data", &preview)
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    fn build(data: Vec<T>, shape: Vec<usize>, requires_grad: bool) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(
                "tensor",
                format!("zero extent in shape {shape:?}"),
            ));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                "tensor",
                format!(
                    "shape {shape:?} holds {numel} elements but {} were given",
                    data.len()
                ),
            ));
        }
        let grad = requires_grad.then(|| vec![T::zero(); numel]);
        Ok(Tensor(Arc::new(Inner {
            shape,
            data: RwLock::new(data),
            grad: Mutex::new(grad),
            requires_grad,
            node: Mutex::new(None),
            released: AtomicBool::new(false),
        })))
    }

    /// Constant tensor (no gradient tracking).
    pub fn new(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        Self::build(data, shape.to_vec(), false)
    }

    /// Trainable leaf tensor with a zeroed gradient accumulator.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        Self::build(data, shape.to_vec(), true)
    }

    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::new(data.iter().map(|&v| T::from_f64_lossy(v)).collect(), shape)
    }

    pub fn scalar(v: T) -> Self {
        Self::build(vec![v], Vec::new(), false).expect("scalar shape")
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(vec![T::zero(); shape.iter().product()], shape)
    }

    pub fn full(shape: &[usize], v: T) -> Result<Self> {
        Self::new(vec![v; shape.iter().product()], shape)
    }

    /// Output of a recorded op. Links into the graph only when an input
    /// requires a gradient.
    pub(crate) fn from_op(
        data: Vec<T>,
        shape: Vec<usize>,
        op: Box<dyn Backward<T>>,
        inputs: Vec<Tensor<T>>,
    ) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        let tracked = inputs.iter().any(|t| t.requires_grad());
        let node = tracked.then(|| Arc::new(Node { op, inputs }));
        Tensor(Arc::new(Inner {
            shape,
            data: RwLock::new(data),
            grad: Mutex::new(None),
            requires_grad: tracked,
            node: Mutex::new(node),
            released: AtomicBool::new(false),
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// True for tensors not produced by a recorded op (parameters and constants).
    pub fn is_leaf(&self) -> bool {
        self.0.node.lock().is_none() && !self.0.released.load(Ordering::Relaxed)
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.0.data.read()
    }

    /// Mutable access to the values, for optimizers and checkpoint loading.
    pub fn data_mut(&self) -> RwLockWriteGuard<'_, Vec<T>> {
        self.0.data.write()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.0.data.read().clone()
    }

    pub fn item(&self) -> T {
        self.0.data.read()[0]
    }

    /// Copy of the accumulated gradient, if this tensor has one.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.lock().clone()
    }

    pub fn zero_grad(&self) {
        if let Some(g) = self.0.grad.lock().as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub(crate) fn accumulate_grad(&self, delta: &[T]) {
        let mut guard = self.0.grad.lock();
        let g = guard.get_or_insert_with(|| vec![T::zero(); delta.len()]);
        for (a, &d) in g.iter_mut().zip(delta) {
            *a += d;
        }
    }

    /// Same values, cut off from the graph.
    pub fn detach(&self) -> Self {
        Self::build(self.to_vec(), self.0.shape.clone(), false).expect("shape already validated")
    }

    pub fn op_kind(&self) -> Option<OpKind> {
        self.0.node.lock().as_ref().map(|n| n.op.kind())
    }

    pub(crate) fn node(&self) -> Option<Arc<Node<T>>> {
        self.0.node.lock().clone()
    }

    pub(crate) fn release(&self) {
        if self.0.node.lock().take().is_some() {
            self.0.released.store(true, Ordering::Relaxed);
        }
    }

    pub(crate) fn is_released(&self) -> bool {
        self.0.released.load(Ordering::Relaxed)
    }

    /// Identity of the underlying storage, stable while any clone is alive.
    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as *const () as usize
    }

    /// Shape `[a, b, c]` as a tuple, or a dimension error naming `op`.
    pub(crate) fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape() {
            &[a, b, c] => Ok((a, b, c)),
            s => Err(Error::shape(
                op,
                format!("expected a rank-3 (B,C,T) tensor, got shape {s:?}"),
            )),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}

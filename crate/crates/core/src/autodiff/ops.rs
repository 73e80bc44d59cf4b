//! Arithmetic and reduction ops. Layer ops live in [`crate::nn::functional`].

use super::{Backward, OpKind, Scalar, Tensor};
use crate::error::{Error, Result};

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        let axes: Vec<usize> = if a.rank() == b.rank() {
            (0..a.rank())
                .filter(|&i| a.shape()[i] != b.shape()[i])
                .collect()
        } else {
            Vec::new()
        };
        return Err(Error::shape(
            op,
            format!(
                "lhs {:?} vs rhs {:?} (differing axes {axes:?})",
                a.shape(),
                b.shape()
            ),
        ));
    }
    Ok(())
}

struct AddOp;

impl<T: Scalar> Backward<T> for AddOp {
    fn kind(&self) -> OpKind {
        OpKind::Add
    }
    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        needs.iter().map(|&n| n.then(|| g.to_vec())).collect()
    }
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("add", a, b)?;
    let data: Vec<T> = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| x + y)
        .collect();
    Ok(Tensor::from_op(
        data,
        a.shape().to_vec(),
        Box::new(AddOp),
        vec![a.clone(), b.clone()],
    ))
}

struct MulOp;

impl<T: Scalar> Backward<T> for MulOp {
    fn kind(&self) -> OpKind {
        OpKind::Mul
    }
    fn backward(&self, g: &[T], inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (a, b) = (inputs[0].data(), inputs[1].data());
        vec![
            needs[0].then(|| g.iter().zip(b.iter()).map(|(&g, &y)| g * y).collect()),
            needs[1].then(|| g.iter().zip(a.iter()).map(|(&g, &x)| g * x).collect()),
        ]
    }
}

/// Elementwise product of two same-shaped tensors.
pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("mul", a, b)?;
    let data: Vec<T> = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| x * y)
        .collect();
    Ok(Tensor::from_op(
        data,
        a.shape().to_vec(),
        Box::new(MulOp),
        vec![a.clone(), b.clone()],
    ))
}

/// Which axis of a `(B,C,T)` tensor a gate is broadcast along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GateAxis {
    /// gate is `(B,C,1)`
    Time,
    /// gate is `(B,1,T)`
    Channel,
}

struct MulBroadcastOp {
    axis: GateAxis,
    dims: (usize, usize, usize),
}

impl<T: Scalar> Backward<T> for MulBroadcastOp {
    fn kind(&self) -> OpKind {
        OpKind::MulBroadcast
    }
    fn backward(&self, g: &[T], inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (b, c, t) = self.dims;
        let x = inputs[0].data();
        let gate = inputs[1].data();
        let gate_at = |bi: usize, ci: usize, ti: usize| match self.axis {
            GateAxis::Time => bi * c + ci,
            GateAxis::Channel => bi * t + ti,
        };
        let dx = needs[0].then(|| {
            let mut dx = vec![T::zero(); b * c * t];
            for bi in 0..b {
                for ci in 0..c {
                    for ti in 0..t {
                        let i = (bi * c + ci) * t + ti;
                        dx[i] = g[i] * gate[gate_at(bi, ci, ti)];
                    }
                }
            }
            dx
        });
        let dgate = needs[1].then(|| {
            let mut dg = vec![T::zero(); gate.len()];
            for bi in 0..b {
                for ci in 0..c {
                    for ti in 0..t {
                        let i = (bi * c + ci) * t + ti;
                        dg[gate_at(bi, ci, ti)] += g[i] * x[i];
                    }
                }
            }
            dg
        });
        vec![dx, dgate]
    }
}

/// `x * gate` for `x` of shape `(B,C,T)` and `gate` of shape `(B,C,1)`
/// (channel-wise) or `(B,1,T)` (time-wise).
pub fn mul_broadcast<T: Scalar>(x: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, t) = x.dims3("mul_broadcast")?;
    let (gb, gc, gt) = gate.dims3("mul_broadcast")?;
    let axis = if gb == b && gc == c && gt == 1 {
        GateAxis::Time
    } else if gb == b && gc == 1 && gt == t {
        GateAxis::Channel
    } else {
        return Err(Error::shape(
            "mul_broadcast",
            format!(
                "gate {:?} is neither (B,C,1) nor (B,1,T) for x {:?}",
                gate.shape(),
                x.shape()
            ),
        ));
    };
    let xd = x.data();
    let gd = gate.data();
    let mut out = vec![T::zero(); b * c * t];
    for bi in 0..b {
        for ci in 0..c {
            let row = (bi * c + ci) * t;
            for ti in 0..t {
                let gv = match axis {
                    GateAxis::Time => gd[bi * c + ci],
                    GateAxis::Channel => gd[bi * t + ti],
                };
                out[row + ti] = xd[row + ti] * gv;
            }
        }
    }
    drop((xd, gd));
    Ok(Tensor::from_op(
        out,
        x.shape().to_vec(),
        Box::new(MulBroadcastOp {
            axis,
            dims: (b, c, t),
        }),
        vec![x.clone(), gate.clone()],
    ))
}

struct ScaleOp<T> {
    factor: T,
}

impl<T: Scalar> Backward<T> for ScaleOp<T> {
    fn kind(&self) -> OpKind {
        OpKind::Scale
    }
    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        vec![needs[0].then(|| g.iter().map(|&v| v * self.factor).collect())]
    }
}

/// `factor * x` with a constant factor.
pub fn scale<T: Scalar>(x: &Tensor<T>, factor: T) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v * factor).collect();
    Tensor::from_op(
        data,
        x.shape().to_vec(),
        Box::new(ScaleOp { factor }),
        vec![x.clone()],
    )
}

struct SumOp {
    n: usize,
    mean: bool,
}

impl<T: Scalar> Backward<T> for SumOp {
    fn kind(&self) -> OpKind {
        if self.mean {
            OpKind::Mean
        } else {
            OpKind::Sum
        }
    }
    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let v = if self.mean {
            g[0] / T::from_usize(self.n).unwrap()
        } else {
            g[0]
        };
        vec![needs[0].then(|| vec![v; self.n])]
    }
}

/// Sum of all elements, as a scalar tensor.
pub fn sum<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.data().iter().copied().sum();
    Tensor::from_op(
        vec![s],
        Vec::new(),
        Box::new(SumOp {
            n: x.numel(),
            mean: false,
        }),
        vec![x.clone()],
    )
}

/// Mean of all elements, as a scalar tensor.
pub fn mean<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let n = x.numel();
    let s: T = x.data().iter().copied().sum();
    let m = s / T::from_usize(n).unwrap();
    Tensor::from_op(
        vec![m],
        Vec::new(),
        Box::new(SumOp { n, mean: true }),
        vec![x.clone()],
    )
}

/// `sum_i weights[i] * terms[i]` over scalar terms.
pub fn weighted_sum<T: Scalar>(terms: &[Tensor<T>], weights: &[T]) -> Result<Tensor<T>> {
    if terms.is_empty() || terms.len() != weights.len() {
        return Err(Error::shape(
            "weighted_sum",
            format!("{} terms vs {} weights", terms.len(), weights.len()),
        ));
    }
    let mut acc = scale(&terms[0], weights[0]);
    for (t, &w) in terms.iter().zip(weights).skip(1) {
        acc = add(&acc, &scale(t, w))?;
    }
    Ok(acc)
}

//! Differentiable layer ops on `(B,C,T)` feature maps and `(B,K)` logits.

use crate::autodiff::linalg::{gemm, MatRef};
use crate::autodiff::{Backward, OpKind, Scalar, Tensor};
use crate::error::{Error, Result};

/// Output length of a 1D convolution, or `None` when the kernel does not fit.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

struct Conv1dOp<T> {
    dims: ConvDims,
    cols: Vec<T>,
    has_bias: bool,
}

#[derive(Clone, Copy)]
struct ConvDims {
    batch: usize,
    c_in: usize,
    c_out: usize,
    len_in: usize,
    len_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
}

impl ConvDims {
    /// Input position read by output position `o` at tap `k`, if inside the signal.
    #[inline]
    fn src(&self, o: usize, k: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < self.len_in).then_some(pos as usize)
    }
}

impl<T: Scalar> Backward<T> for Conv1dOp<T> {
    fn kind(&self) -> OpKind {
        OpKind::Conv1d
    }

    fn backward(&self, g: &[T], inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let d = self.dims;
        let n = d.batch * d.len_out;
        let ck = d.c_in * d.kernel;
        // (B, C_out, T') -> (C_out, B*T')
        let mut gp = vec![T::zero(); d.c_out * n];
        for b in 0..d.batch {
            for co in 0..d.c_out {
                let src = &g[(b * d.c_out + co) * d.len_out..][..d.len_out];
                gp[co * n + b * d.len_out..][..d.len_out].copy_from_slice(src);
            }
        }

        let dx = needs[0].then(|| {
            let w = inputs[1].data();
            let mut dcols = vec![T::zero(); ck * n];
            gemm(
                T::one(),
                MatRef::rows(&w, d.c_out, ck).t(),
                MatRef::rows(&gp, d.c_out, n),
                T::zero(),
                &mut dcols,
            );
            let mut dx = vec![T::zero(); d.batch * d.c_in * d.len_in];
            for ci in 0..d.c_in {
                for k in 0..d.kernel {
                    let row = &dcols[(ci * d.kernel + k) * n..][..n];
                    for b in 0..d.batch {
                        let dst = &mut dx[(b * d.c_in + ci) * d.len_in..][..d.len_in];
                        for o in 0..d.len_out {
                            if let Some(p) = d.src(o, k) {
                                dst[p] += row[b * d.len_out + o];
                            }
                        }
                    }
                }
            }
            dx
        });
        let dw = needs[1].then(|| {
            let mut dw = vec![T::zero(); d.c_out * ck];
            gemm(
                T::one(),
                MatRef::rows(&gp, d.c_out, n),
                MatRef::rows(&self.cols, ck, n).t(),
                T::zero(),
                &mut dw,
            );
            dw
        });
        let mut out = vec![dx, dw];
        if self.has_bias {
            out.push(needs[2].then(|| {
                (0..d.c_out)
                    .map(|co| gp[co * n..][..n].iter().copied().sum())
                    .collect()
            }));
        }
        out
    }
}

/// Cross-correlation (no kernel flip) of `x: (B,C_in,T)` with
/// `weight: (C_out,C_in,K)`, zero padding, plus an optional `(C_out)` bias.
pub fn conv1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (batch, c_in, len_in) = x.dims3("conv1d")?;
    let (c_out, wc_in, kernel) = weight.dims3("conv1d")?;
    if wc_in != c_in {
        return Err(Error::shape(
            "conv1d",
            format!("input has {c_in} channels on axis 1 but weight expects {wc_in}"),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::shape(
                "conv1d",
                format!("bias shape {:?}, expected [{c_out}]", b.shape()),
            ));
        }
    }
    let len_out = conv_out_len(len_in, kernel, stride, padding).ok_or_else(|| {
        Error::shape(
            "conv1d",
            format!("time axis {len_in} with padding {padding} is shorter than kernel {kernel} (stride {stride})"),
        )
    })?;
    let d = ConvDims {
        batch,
        c_in,
        c_out,
        len_in,
        len_out,
        kernel,
        stride,
        padding,
    };
    let n = batch * len_out;
    let ck = c_in * kernel;

    let mut cols = vec![T::zero(); ck * n];
    {
        let xd = x.data();
        for ci in 0..c_in {
            for k in 0..kernel {
                let row = &mut cols[(ci * kernel + k) * n..][..n];
                for b in 0..batch {
                    let src = &xd[(b * c_in + ci) * len_in..][..len_in];
                    for o in 0..len_out {
                        if let Some(p) = d.src(o, k) {
                            row[b * len_out + o] = src[p];
                        }
                    }
                }
            }
        }
    }
    let mut tmp = vec![T::zero(); c_out * n];
    gemm(
        T::one(),
        MatRef::rows(&weight.data(), c_out, ck),
        MatRef::rows(&cols, ck, n),
        T::zero(),
        &mut tmp,
    );

    let mut out = vec![T::zero(); batch * c_out * len_out];
    let bias_data = bias.map(|b| b.to_vec());
    for b in 0..batch {
        for co in 0..c_out {
            let bv = bias_data.as_ref().map_or(T::zero(), |bd| bd[co]);
            let dst = &mut out[(b * c_out + co) * len_out..][..len_out];
            let src = &tmp[co * n + b * len_out..][..len_out];
            for (o, &s) in dst.iter_mut().zip(src) {
                *o = s + bv;
            }
        }
    }
    let mut inputs = vec![x.clone(), weight.clone()];
    if let Some(b) = bias {
        inputs.push(b.clone());
    }
    Ok(Tensor::from_op(
        out,
        vec![batch, c_out, len_out],
        Box::new(Conv1dOp {
            dims: d,
            cols,
            has_bias: bias.is_some(),
        }),
        inputs,
    ))
}

/// Statistics used to standardise a batch-norm input.
pub enum BnStats<'a, T> {
    /// Per-channel mean and biased variance of the current batch.
    Batch,
    /// Stored running estimates (evaluation mode).
    Running { mean: &'a [T], var: &'a [T] },
}

/// Per-channel moments of a training batch, reported back so the layer can
/// update its running estimates.
#[derive(Debug, Clone)]
pub struct BatchMoments<T> {
    pub mean: Vec<T>,
    pub var_biased: Vec<T>,
    pub count: usize,
}

struct BatchNormOp<T> {
    dims: (usize, usize, usize),
    xhat: Vec<T>,
    inv_std: Vec<T>,
    batch_stats: bool,
}

impl<T: Scalar> Backward<T> for BatchNormOp<T> {
    fn kind(&self) -> OpKind {
        OpKind::BatchNorm1d
    }

    fn backward(&self, g: &[T], inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (b, c, t) = self.dims;
        let gamma = inputs[1].data();
        let m = T::from_usize(b * t).unwrap();
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * t;
                for i in base..base + t {
                    dgamma[ci] += g[i] * self.xhat[i];
                    dbeta[ci] += g[i];
                }
            }
        }
        let dx = needs[0].then(|| {
            let mut dx = vec![T::zero(); b * c * t];
            for bi in 0..b {
                for ci in 0..c {
                    let base = (bi * c + ci) * t;
                    let scale = gamma[ci] * self.inv_std[ci];
                    for i in base..base + t {
                        dx[i] = if self.batch_stats {
                            scale * (g[i] - dbeta[ci] / m - self.xhat[i] * dgamma[ci] / m)
                        } else {
                            scale * g[i]
                        };
                    }
                }
            }
            dx
        });
        vec![dx, needs[1].then_some(dgamma), needs[2].then_some(dbeta)]
    }
}

/// Batch normalisation over the batch and time axes of `x: (B,C,T)`.
///
/// Returns the normalised output and, for [`BnStats::Batch`], the batch moments.
pub fn batch_norm1d<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats: BnStats<'_, T>,
    eps: T,
) -> Result<(Tensor<T>, Option<BatchMoments<T>>)> {
    let (b, c, t) = x.dims3("batchnorm1d")?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(
            "batchnorm1d",
            format!(
                "input has {c} channels on axis 1, gamma {:?}, beta {:?}",
                gamma.shape(),
                beta.shape()
            ),
        ));
    }
    let xd = x.data();
    let count = b * t;
    let (mean, var, moments) = match stats {
        BnStats::Batch => {
            if count < 2 {
                return Err(Error::invalid(
                    "batchnorm1d",
                    format!(
                        "training statistics need at least 2 values per channel, got B*T = {count}"
                    ),
                ));
            }
            let n = T::from_usize(count).unwrap();
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for bi in 0..b {
                for ci in 0..c {
                    mean[ci] += xd[(bi * c + ci) * t..][..t].iter().copied().sum();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            for bi in 0..b {
                for ci in 0..c {
                    var[ci] += xd[(bi * c + ci) * t..][..t]
                        .iter()
                        .map(|&v| (v - mean[ci]) * (v - mean[ci]))
                        .sum();
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            let moments = BatchMoments {
                mean: mean.clone(),
                var_biased: var.clone(),
                count,
            };
            (mean, var, Some(moments))
        }
        BnStats::Running { mean, var } => {
            if mean.len() != c || var.len() != c {
                return Err(Error::shape(
                    "batchnorm1d",
                    "running statistics do not match channel count",
                ));
            }
            (mean.to_vec(), var.to_vec(), None)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let gd = gamma.data();
    let bd = beta.data();
    let mut xhat = vec![T::zero(); b * c * t];
    let mut out = vec![T::zero(); b * c * t];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * t;
            for i in base..base + t {
                xhat[i] = (xd[i] - mean[ci]) * inv_std[ci];
                out[i] = gd[ci] * xhat[i] + bd[ci];
            }
        }
    }
    drop((xd, gd, bd));
    let op = BatchNormOp {
        dims: (b, c, t),
        xhat,
        inv_std,
        batch_stats: moments.is_some(),
    };
    let y = Tensor::from_op(
        out,
        vec![b, c, t],
        Box::new(op),
        vec![x.clone(), gamma.clone(), beta.clone()],
    );
    Ok((y, moments))
}

struct LinearOp {
    rows: usize,
    d_in: usize,
    d_out: usize,
}

impl<T: Scalar> Backward<T> for LinearOp {
    fn kind(&self) -> OpKind {
        OpKind::Linear
    }

    fn backward(&self, g: &[T], inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (n, i, o) = (self.rows, self.d_in, self.d_out);
        let dx = needs[0].then(|| {
            let mut dx = vec![T::zero(); n * i];
            gemm(
                T::one(),
                MatRef::rows(g, n, o),
                MatRef::rows(&inputs[1].data(), o, i),
                T::zero(),
                &mut dx,
            );
            dx
        });
        let dw = needs[1].then(|| {
            let mut dw = vec![T::zero(); o * i];
            gemm(
                T::one(),
                MatRef::rows(g, n, o).t(),
                MatRef::rows(&inputs[0].data(), n, i),
                T::zero(),
                &mut dw,
            );
            dw
        });
        let db = needs[2].then(|| {
            let mut db = vec![T::zero(); o];
            for row in g.chunks_exact(o) {
                db.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
            }
            db
        });
        vec![dx, dw, db]
    }
}

/// `x W^T + b` over the last axis of `x`; `weight: (out,in)`, `bias: (out)`.
pub fn linear<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (d_out, d_in) = match weight.shape() {
        &[o, i] => (o, i),
        s => {
            return Err(Error::shape(
                "linear",
                format!("weight must be rank 2, got {s:?}"),
            ))
        }
    };
    let last = *x
        .shape()
        .last()
        .ok_or_else(|| Error::shape("linear", "input is a scalar"))?;
    if last != d_in {
        return Err(Error::shape(
            "linear",
            format!(
                "input last axis {} has {last} features, weight expects {d_in}",
                x.rank() - 1
            ),
        ));
    }
    if bias.shape() != [d_out] {
        return Err(Error::shape(
            "linear",
            format!("bias shape {:?}, expected [{d_out}]", bias.shape()),
        ));
    }
    let rows = x.numel() / d_in;
    let mut out = vec![T::zero(); rows * d_out];
    {
        let bd = bias.data();
        for row in out.chunks_exact_mut(d_out) {
            row.copy_from_slice(&bd);
        }
    }
    gemm(
        T::one(),
        MatRef::rows(&x.data(), rows, d_in),
        MatRef::rows(&weight.data(), d_out, d_in).t(),
        T::one(),
        &mut out,
    );
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = d_out;
    Ok(Tensor::from_op(
        out,
        shape,
        Box::new(LinearOp { rows, d_in, d_out }),
        vec![x.clone(), weight.clone(), bias.clone()],
    ))
}

struct UnaryOp<T> {
    kind: OpKind,
    out: Vec<T>,
}

impl<T: Scalar> Backward<T> for UnaryOp<T> {
    fn kind(&self) -> OpKind {
        self.kind
    }

    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let dx = needs[0].then(|| match self.kind {
            OpKind::Relu => g
                .iter()
                .zip(&self.out)
                .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
                .collect(),
            _ => g
                .iter()
                .zip(&self.out)
                .map(|(&g, &y)| g * y * (T::one() - y))
                .collect(),
        });
        vec![dx]
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let out: Vec<T> = x
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    let saved = if x.requires_grad() {
        out.clone()
    } else {
        Vec::new()
    };
    Tensor::from_op(
        out,
        x.shape().to_vec(),
        Box::new(UnaryOp {
            kind: OpKind::Relu,
            out: saved,
        }),
        vec![x.clone()],
    )
}

fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    // split by sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Elementwise logistic function `1 / (1 + e^-x)`.
pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| sigmoid_scalar(v)).collect();
    let saved = if x.requires_grad() {
        out.clone()
    } else {
        Vec::new()
    };
    Tensor::from_op(
        out,
        x.shape().to_vec(),
        Box::new(UnaryOp {
            kind: OpKind::Sigmoid,
            out: saved,
        }),
        vec![x.clone()],
    )
}

#[derive(Clone, Copy)]
enum PoolAxis {
    Time,
    Channel,
    Global,
}

struct PoolOp {
    axis: PoolAxis,
    dims: (usize, usize, usize),
}

impl<T: Scalar> Backward<T> for PoolOp {
    fn kind(&self) -> OpKind {
        match self.axis {
            PoolAxis::Time => OpKind::AvgPoolTime,
            PoolAxis::Channel => OpKind::AvgPoolChannel,
            PoolAxis::Global => OpKind::GlobalAvgPool,
        }
    }

    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (b, c, t) = self.dims;
        let dx = needs[0].then(|| {
            let mut dx = vec![T::zero(); b * c * t];
            match self.axis {
                PoolAxis::Time | PoolAxis::Global => {
                    let inv = T::one() / T::from_usize(t).unwrap();
                    for (row, &gv) in dx.chunks_exact_mut(t).zip(g) {
                        row.iter_mut().for_each(|v| *v = gv * inv);
                    }
                }
                PoolAxis::Channel => {
                    let inv = T::one() / T::from_usize(c).unwrap();
                    for bi in 0..b {
                        for ci in 0..c {
                            let row = &mut dx[(bi * c + ci) * t..][..t];
                            for (v, &gv) in row.iter_mut().zip(&g[bi * t..][..t]) {
                                *v = gv * inv;
                            }
                        }
                    }
                }
            }
            dx
        });
        vec![dx]
    }
}

fn pool<T: Scalar>(x: &Tensor<T>, axis: PoolAxis, op: &'static str) -> Result<Tensor<T>> {
    let (b, c, t) = x.dims3(op)?;
    let xd = x.data();
    let (out, shape) = match axis {
        PoolAxis::Time | PoolAxis::Global => {
            let n = T::from_usize(t).unwrap();
            let out: Vec<T> = xd
                .chunks_exact(t)
                .map(|row| row.iter().copied().sum::<T>() / n)
                .collect();
            let shape = if matches!(axis, PoolAxis::Time) {
                vec![b, c, 1]
            } else {
                vec![b, c]
            };
            (out, shape)
        }
        PoolAxis::Channel => {
            let n = T::from_usize(c).unwrap();
            let mut out = vec![T::zero(); b * t];
            for bi in 0..b {
                let acc = &mut out[bi * t..][..t];
                for ci in 0..c {
                    for (a, &v) in acc.iter_mut().zip(&xd[(bi * c + ci) * t..][..t]) {
                        *a += v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n);
            }
            (out, vec![b, 1, t])
        }
    };
    drop(xd);
    Ok(Tensor::from_op(
        out,
        shape,
        Box::new(PoolOp {
            axis,
            dims: (b, c, t),
        }),
        vec![x.clone()],
    ))
}

/// Mean over the time axis: `(B,C,T) -> (B,C,1)`.
pub fn avg_pool_time<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    pool(x, PoolAxis::Time, "avg_pool_time")
}

/// Mean over the channel axis: `(B,C,T) -> (B,1,T)`.
pub fn avg_pool_channel<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    pool(x, PoolAxis::Channel, "avg_pool_channel")
}

/// Mean over time with the time axis dropped: `(B,C,T) -> (B,C)`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    pool(x, PoolAxis::Global, "global_avg_pool")
}

fn rows2(x: &Tensor<impl Scalar>, op: &'static str) -> Result<(usize, usize)> {
    match x.shape() {
        &[b, k] => Ok((b, k)),
        s => Err(Error::shape(
            op,
            format!("expected (B,K) logits, got shape {s:?}"),
        )),
    }
}

/// Max-shifted softmax of one row, written into `out`. Returns log-sum-exp.
fn softmax_row<T: Scalar>(row: &[T], out: &mut [T]) -> T {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
    m + z.ln()
}

struct SoftmaxOp<T> {
    k: usize,
    out: Vec<T>,
}

impl<T: Scalar> Backward<T> for SoftmaxOp<T> {
    fn kind(&self) -> OpKind {
        OpKind::Softmax
    }

    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let dx = needs[0].then(|| {
            let mut dx = vec![T::zero(); g.len()];
            for ((d, gr), y) in dx
                .chunks_exact_mut(self.k)
                .zip(g.chunks_exact(self.k))
                .zip(self.out.chunks_exact(self.k))
            {
                let dot: T = gr.iter().zip(y).map(|(&a, &b)| a * b).sum();
                for ((dv, &gv), &yv) in d.iter_mut().zip(gr).zip(y) {
                    *dv = yv * (gv - dot);
                }
            }
            dx
        });
        vec![dx]
    }
}

/// Row-wise softmax of `(B,K)` logits.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = rows2(logits, "softmax")?;
    if !logits.all_finite() {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let mut out = vec![T::zero(); logits.numel()];
    for (row, o) in logits.data().chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        softmax_row(row, o);
    }
    let saved = out.clone();
    Ok(Tensor::from_op(
        out,
        logits.shape().to_vec(),
        Box::new(SoftmaxOp { k, out: saved }),
        vec![logits.clone()],
    ))
}

struct CrossEntropyOp<T> {
    k: usize,
    probs: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> Backward<T> for CrossEntropyOp<T> {
    fn kind(&self) -> OpKind {
        OpKind::CrossEntropy
    }

    fn backward(&self, g: &[T], _inputs: &[Tensor<T>], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let dx = needs[0].then(|| {
            let scale = g[0] / T::from_usize(self.labels.len()).unwrap();
            let mut dx: Vec<T> = self.probs.iter().map(|&p| p * scale).collect();
            for (row, &y) in dx.chunks_exact_mut(self.k).zip(&self.labels) {
                row[y] -= scale;
            }
            dx
        });
        vec![dx]
    }
}

/// Mean categorical cross-entropy `-log softmax(logits)[label]` over the batch,
/// computed through log-sum-exp.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let (b, k) = rows2(logits, "cross_entropy")?;
    if labels.len() != b {
        return Err(Error::shape(
            "cross_entropy",
            format!("{b} logit rows but {} labels", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Label {
            label: bad,
            classes: k,
        });
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("cross_entropy logits".into()));
    }
    let mut probs = vec![T::zero(); b * k];
    let mut total = T::zero();
    for ((row, p), &y) in logits
        .data()
        .chunks_exact(k)
        .zip(probs.chunks_exact_mut(k))
        .zip(labels)
    {
        let lse = softmax_row(row, p);
        total += lse - row[y];
    }
    let loss = total / T::from_usize(b).unwrap();
    Ok(Tensor::from_op(
        vec![loss],
        Vec::new(),
        Box::new(CrossEntropyOp {
            k,
            probs,
            labels: labels.to_vec(),
        }),
        vec![logits.clone()],
    ))
}

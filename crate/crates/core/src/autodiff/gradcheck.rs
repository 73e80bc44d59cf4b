use super::{grad, Graph, Tensor};
use crate::error::{Error, Result};

/// Magnitude below which the relative error is measured against this floor
/// instead of the gradient itself.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradcheckReport {
    /// `max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, REL_ERR_FLOOR)`
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Flat index (across all checked leaves, in order) of the worst entry.
    pub worst_index: usize,
    pub checked: usize,
    pub tol: f64,
    pub passed: bool,
}

fn eval_scalar(f: &impl Fn() -> Result<Tensor<f64>>) -> Result<(Tensor<f64>, f64)> {
    let out = f()?;
    if out.numel() != 1 {
        return Err(Error::NonScalarLoss(out.shape().to_vec()));
    }
    let v = out.item();
    if !v.is_finite() {
        let culprit = Graph::trace(&out)
            .nodes()
            .iter()
            .find(|t| !t.all_finite())
            .and_then(|t| t.op_kind())
            .map(|k| k.to_string())
            .unwrap_or_else(|| "function output".into());
        return Err(Error::NonFinite(culprit));
    }
    Ok((out, v))
}

/// Check the gradient of a scalar function with respect to leaf tensors that
/// the function closes over. Each leaf is perturbed in place and restored.
pub fn gradcheck_leaves(
    f: impl Fn() -> Result<Tensor<f64>>,
    leaves: &[Tensor<f64>],
    eps: f64,
    tol: f64,
) -> Result<GradcheckReport> {
    let (out, _) = eval_scalar(&f)?;
    let analytic = grad(&out, leaves)?;
    drop(out);

    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst_index: 0,
        checked: 0,
        tol,
        passed: true,
    };
    let mut flat = 0;
    for (leaf, an) in leaves.iter().zip(&analytic) {
        for i in 0..leaf.numel() {
            let orig = leaf.data()[i];
            leaf.data_mut()[i] = orig + eps;
            let plus = eval_scalar(&f);
            leaf.data_mut()[i] = orig - eps;
            let minus = eval_scalar(&f);
            leaf.data_mut()[i] = orig;
            let numeric = (plus?.1 - minus?.1) / (2.0 * eps);
            let abs = (an[i] - numeric).abs();
            let rel = abs / an[i].abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_index = flat;
            }
            report.max_abs_err = report.max_abs_err.max(abs);
            flat += 1;
        }
    }
    report.checked = flat;
    report.passed = report.max_rel_err <= tol;
    Ok(report)
}

/// Check `d f(x) / d x` for a scalar-valued `f` at `x`.
pub fn gradcheck(
    f: impl Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
    x: &Tensor<f64>,
    eps: f64,
    tol: f64,
) -> Result<GradcheckReport> {
    let leaf = Tensor::param(x.to_vec(), x.shape())?;
    gradcheck_leaves(|| f(&leaf), std::slice::from_ref(&leaf), eps, tol)
}

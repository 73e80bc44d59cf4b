use log::warn;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad, ops, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::model::{Dt4EcgModel, SharedScope};
use crate::nn;

/// Per-task loss weights and the rate at which they move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    pub w: Vec<f64>,
    pub alpha: f64,
    /// Rescale to `sum(w) = M` after each update.
    pub renormalize: bool,
}

/// What one update did.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    /// `g_i / sum_j g_j`.
    pub delta: Vec<f64>,
    /// `exp(alpha * (delta_i - 1))`.
    pub factors: Vec<f64>,
    /// True when every norm was zero and the weights were kept.
    pub skipped: bool,
}

impl TaskWeights {
    pub fn new(tasks: usize, alpha: f64, renormalize: bool) -> Self {
        TaskWeights {
            w: vec![1.0; tasks],
            alpha,
            renormalize,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `w_i <- w_i * exp(alpha * (g_i / sum g - 1))`, then the optional rescale.
    pub fn update(&mut self, g: &[f64]) -> Result<WeightUpdate> {
        if g.len() != self.w.len() {
            return Err(Error::shape(
                "gradnorm",
                format!("{} norms for {} tasks", g.len(), self.w.len()),
            ));
        }
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite(format!(
                "gradnorm task gradient norms {g:?}"
            )));
        }
        let total: f64 = g.iter().sum();
        if total == 0.0 {
            warn!("gradnorm: every task gradient norm is zero; weights left unchanged");
            return Ok(WeightUpdate {
                delta: vec![0.0; g.len()],
                factors: vec![1.0; g.len()],
                skipped: true,
            });
        }
        let delta: Vec<f64> = g.iter().map(|v| v / total).collect();
        let factors: Vec<f64> = delta
            .iter()
            .map(|d| (self.alpha * (d - 1.0)).exp())
            .collect();
        for (w, f) in self.w.iter_mut().zip(&factors) {
            *w *= f;
        }
        if self.renormalize {
            let s: f64 = self.w.iter().sum();
            let m = self.w.len() as f64;
            self.w.iter_mut().for_each(|w| *w *= m / s);
        }
        Ok(WeightUpdate {
            delta,
            factors,
            skipped: false,
        })
    }
}

/// Result of one GradNorm step on a batch.
pub struct GradNormStep<T: Scalar> {
    /// `sum_i w_i L_i` with the updated weights; call `backward` on it.
    pub total: Tensor<T>,
    pub losses: [f64; 2],
    pub norms: [f64; 2],
    pub id_logits: Tensor<T>,
    pub activity_logits: Tensor<T>,
}

pub(crate) fn l2(g: &[Vec<impl Scalar>]) -> f64 {
    g.iter()
        .flatten()
        .map(|v| v.to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Forward a batch, measure each task's gradient norm over the shared
/// parameters, update `weights`, and build the weighted total loss.
pub fn gradnorm_step<T: Scalar>(
    model: &Dt4EcgModel<T>,
    x: &Tensor<T>,
    id_labels: &[usize],
    activity_labels: &[usize],
    weights: &mut TaskWeights,
    scope: SharedScope,
) -> Result<GradNormStep<T>> {
    if weights.len() != 2 {
        return Err(Error::invalid(
            "gradnorm",
            "the model has exactly two tasks",
        ));
    }
    let out = model.forward_full(x)?;
    let l_id = nn::cross_entropy(&out.id_logits, id_labels)?;
    let l_act = nn::cross_entropy(&out.activity_logits, activity_labels)?;
    let shared = model.shared_parameters(scope);
    let norms = [l2(&grad(&l_id, &shared)?), l2(&grad(&l_act, &shared)?)];
    weights.update(&norms)?;
    let w: Vec<T> = weights.w.iter().map(|&v| T::from_f64_lossy(v)).collect();
    let total = ops::weighted_sum(&[l_id.clone(), l_act.clone()], &w)?;
    Ok(GradNormStep {
        total,
        losses: [l_id.item().to_f64_lossy(), l_act.item().to_f64_lossy()],
        norms,
        id_logits: out.id_logits,
        activity_logits: out.activity_logits,
    })
}

use crate::autodiff::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::nn::{Module, Role};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a fixed list of named parameters.
#[derive(Debug)]
pub struct Adam<T: Scalar> {
    pub config: AdamConfig,
    pub step: u64,
    params: Vec<(String, Tensor<T>)>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: Vec<(String, Tensor<T>)>, config: AdamConfig) -> Self {
        let m = params
            .iter()
            .map(|(_, p)| vec![T::zero(); p.numel()])
            .collect();
        let v = params
            .iter()
            .map(|(_, p)| vec![T::zero(); p.numel()])
            .collect();
        Adam {
            config,
            step: 0,
            params,
            m,
            v,
        }
    }

    /// Every trainable parameter of `module`, in module order.
    pub fn for_module(module: &impl Module<T>, config: AdamConfig) -> Self {
        let params = module
            .named_tensors()
            .into_iter()
            .filter(|n| n.role == Role::Param)
            .map(|n| (n.name, n.tensor))
            .collect();
        Self::new(params, config)
    }

    pub fn zero_grad(&self) {
        self.params.iter().for_each(|(_, p)| p.zero_grad());
    }

    /// Apply one update from the accumulated gradients. Parameters without a
    /// gradient are left alone; nothing moves if any gradient is non-finite.
    pub fn step(&mut self) -> Result<()> {
        let grads: Vec<Option<Vec<T>>> = self.params.iter().map(|(_, p)| p.grad()).collect();
        for ((name, _), g) in self.params.iter().zip(&grads) {
            if g.as_ref().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite(format!("gradient of parameter {name}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let correction1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let correction2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut data = self.params[i].1.data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64, g: Option<f64>) -> (Tensor<f64>, Adam<f64>) {
        let p = Tensor::param(vec![v], &[1]).unwrap();
        if let Some(g) = g {
            p.accumulate_grad(&[g]);
        }
        let adam = Adam::new(vec![("p".into(), p.clone())], AdamConfig::default());
        (p, adam)
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let (p, mut adam) = single(0.3, Some(0.0));
        adam.step().unwrap();
        assert_eq!(p.item(), 0.3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (p, mut adam) = single(0.0, Some(1.0));
        adam.step().unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
        assert!((p.item() + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_descends_monotonically() {
        let (p, mut adam) = single(1.0, None);
        // Iterate the textbook recurrences alongside.
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        let mut prev = p.item();
        for t in 1..=10 {
            p.zero_grad();
            p.accumulate_grad(&[0.5]);
            adam.step().unwrap();
            m = 0.9 * m + 0.1 * 0.5;
            v = 0.999 * v + 0.001 * 0.25;
            x -= 1e-3 * (m / (1.0 - 0.9f64.powi(t)))
                / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            assert!(p.item() < prev);
            assert!((p.item() - x).abs() < 1e-14);
            prev = p.item();
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (p, mut adam) = single(0.5, Some(f64::NAN));
        let err = adam.step().unwrap_err();
        assert!(err.to_string().contains("parameter p"), "{err}");
        assert_eq!(p.item(), 0.5);
    }
}

//! Sequence-channel attention.
//!
//! A channel gate `alpha = sigmoid(conv(avgpool_t(X)))` of shape `(B,C,1)`
//! rescales every channel, giving `X' = X * alpha`. A time gate
//! `beta = sigmoid(fc(avgpool_c(X')))` of shape `(B,1,T)`, computed from `X'`,
//! then rescales every time step: `X'' = X' * beta = X * alpha * beta`.
//!
//! The channel branch is an SE-style bottleneck: two pointwise convolutions
//! `C -> C/r -> C` with a ReLU between them. The time branch is a single
//! fully connected `T -> T` layer, so the module is tied to one input length.

use rand::Rng;

use crate::autodiff::{ops, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::nn::{self, join, Conv1dLayer, LinearLayer, Module, NamedTensor};

pub const DEFAULT_REDUCTION: usize = 4;

#[derive(Debug, Clone)]
pub struct ScaModule<T: Scalar> {
    pub reduce: Conv1dLayer<T>,
    pub expand: Conv1dLayer<T>,
    pub seq_fc: LinearLayer<T>,
    pub expected_len: usize,
}

/// Intermediate values of one attention pass.
#[derive(Debug, Clone)]
pub struct ScaTrace<T: Scalar> {
    /// `(B,C,1)` channel gate.
    pub alpha: Tensor<T>,
    /// `X * alpha`.
    pub channel_scaled: Tensor<T>,
    /// `(B,1,T)` time gate, computed from `channel_scaled`.
    pub beta: Tensor<T>,
    pub output: Tensor<T>,
}

impl<T: Scalar> ScaModule<T> {
    pub fn new(channels: usize, len: usize, reduction: usize, rng: &mut impl Rng) -> Result<Self> {
        if reduction == 0 || !channels.is_multiple_of(reduction) || channels / reduction == 0 {
            return Err(Error::invalid(
                "sca",
                format!("reduction ratio {reduction} must divide the channel count {channels}"),
            ));
        }
        if len == 0 {
            return Err(Error::invalid("sca", "sequence length must be positive"));
        }
        let hidden = channels / reduction;
        Ok(ScaModule {
            reduce: Conv1dLayer::new(channels, hidden, 1, 1, 0, rng)?,
            expand: Conv1dLayer::new(hidden, channels, 1, 1, 0, rng)?,
            seq_fc: LinearLayer::new(len, len, rng)?,
            expected_len: len,
        })
    }

    pub fn channels(&self) -> usize {
        self.reduce.in_channels()
    }

    /// `alpha = sigmoid(expand(relu(reduce(avgpool_t(x)))))`, shape `(B,C,1)`.
    pub fn channel_attention(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, _) = x.dims3("sca.channel_attention")?;
        if c != self.channels() {
            return Err(Error::shape(
                "sca.channel_attention",
                format!(
                    "input has {c} channels on axis 1, module built for {}",
                    self.channels()
                ),
            ));
        }
        let pooled = nn::avg_pool_time(x)?;
        let z = self
            .expand
            .forward(&nn::relu(&self.reduce.forward(&pooled)?))?;
        Ok(nn::sigmoid(&z))
    }

    /// `beta = sigmoid(seq_fc(avgpool_c(x)))`, shape `(B,1,T)`.
    pub fn sequence_attention(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, _, t) = x.dims3("sca.sequence_attention")?;
        if t != self.expected_len {
            return Err(Error::shape(
                "sca.sequence_attention",
                format!(
                    "time axis 2 has length {t}, module built for {}",
                    self.expected_len
                ),
            ));
        }
        let pooled = nn::avg_pool_channel(x)?;
        Ok(nn::sigmoid(&self.seq_fc.forward(&pooled)?))
    }

    pub fn trace(&self, x: &Tensor<T>) -> Result<ScaTrace<T>> {
        let alpha = self.channel_attention(x)?;
        let channel_scaled = ops::mul_broadcast(x, &alpha)?;
        let beta = self.sequence_attention(&channel_scaled)?;
        let output = ops::mul_broadcast(&channel_scaled, &beta)?;
        Ok(ScaTrace {
            alpha,
            channel_scaled,
            beta,
            output,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.trace(x)?.output)
    }
}

impl<T: Scalar> Module<T> for ScaModule<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        self.reduce.collect(&join(prefix, "channel.reduce"), out);
        self.expand.collect(&join(prefix, "channel.expand"), out);
        self.seq_fc.collect(&join(prefix, "seq_fc"), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn random_input(seed: u64, shape: &[usize]) -> Tensor<f64> {
        let mut rng = seeded(seed, &[99]);
        let n = shape.iter().product();
        Tensor::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect(), shape).unwrap()
    }

    fn zero_module(c: usize, t: usize) -> ScaModule<f64> {
        let m = ScaModule::<f64>::new(c, t, 4, &mut seeded(1, &[])).unwrap();
        for p in m.parameters() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    #[test]
    fn zeroed_gates_are_one_half_and_output_is_quarter() {
        let m = zero_module(8, 30);
        let x = random_input(3, &[2, 8, 30]);
        let tr = m.trace(&x).unwrap();
        assert_eq!(tr.alpha.shape(), &[2, 8, 1]);
        assert_eq!(tr.beta.shape(), &[2, 1, 30]);
        assert!(tr.alpha.data().iter().all(|&a| a == 0.5));
        assert!(tr.beta.data().iter().all(|&b| b == 0.5));
        for (o, xi) in tr.output.data().iter().zip(x.data().iter()) {
            assert_eq!(*o, 0.25 * xi);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let m = ScaModule::<f64>::new(8, 30, 4, &mut seeded(1, &[])).unwrap();
        assert!(m.channel_attention(&random_input(1, &[2, 4, 30])).is_err());
        assert!(m.sequence_attention(&random_input(1, &[2, 8, 31])).is_err());
        assert!(ScaModule::<f64>::new(6, 30, 4, &mut seeded(1, &[])).is_err());
    }

    #[test]
    fn channel_gate_matches_step_by_step_composition() {
        let m = ScaModule::<f64>::new(8, 30, 4, &mut seeded(5, &[])).unwrap();
        let x = random_input(6, &[2, 8, 30]);
        let alpha = m.channel_attention(&x).unwrap().to_vec();

        // Scalar oracle: pooled means, two matrix-vector products, logistic.
        let xd = x.to_vec();
        let w1 = m.reduce.weight.to_vec();
        let b1 = m.reduce.bias.to_vec();
        let w2 = m.expand.weight.to_vec();
        let b2 = m.expand.bias.to_vec();
        for b in 0..2 {
            let pooled: Vec<f64> = (0..8)
                .map(|c| xd[(b * 8 + c) * 30..][..30].iter().sum::<f64>() / 30.0)
                .collect();
            let hidden: Vec<f64> = (0..2)
                .map(|h| (b1[h] + (0..8).map(|c| w1[h * 8 + c] * pooled[c]).sum::<f64>()).max(0.0))
                .collect();
            for c in 0..8 {
                let z = b2[c] + (0..2).map(|h| w2[c * 2 + h] * hidden[h]).sum::<f64>();
                let want = 1.0 / (1.0 + (-z).exp());
                assert!((alpha[b * 8 + c] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sequence_gate_matches_step_by_step_composition() {
        let m = ScaModule::<f64>::new(8, 30, 4, &mut seeded(8, &[])).unwrap();
        let x = random_input(9, &[2, 8, 30]);
        let beta = m.sequence_attention(&x).unwrap().to_vec();
        let xd = x.to_vec();
        let w = m.seq_fc.weight.to_vec();
        let bias = m.seq_fc.bias.to_vec();
        for b in 0..2 {
            let pooled: Vec<f64> = (0..30)
                .map(|t| (0..8).map(|c| xd[(b * 8 + c) * 30 + t]).sum::<f64>() / 8.0)
                .collect();
            for t in 0..30 {
                let s = bias[t] + (0..30).map(|u| w[t * 30 + u] * pooled[u]).sum::<f64>();
                let want = 1.0 / (1.0 + (-s).exp());
                assert!((beta[b * 30 + t] - want).abs() < 1e-12);
            }
        }
    }
}

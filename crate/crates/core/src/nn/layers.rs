use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::functional::{self as F, BnStats};
use super::{join, Mode, Module, NamedTensor, Role};
use crate::autodiff::{ops, Scalar, Tensor};
use crate::error::{Error, Result};

/// Kaiming-uniform (fan-in, ReLU gain) weights: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
fn kaiming_uniform<T: Scalar>(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    (0..n)
        .map(|_| T::from_f64_lossy(dist.sample(rng)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Conv1dLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if c_in == 0 || c_out == 0 || kernel == 0 || stride == 0 {
            return Err(Error::invalid(
                "conv1d",
                "channels, kernel and stride must be positive",
            ));
        }
        Ok(Conv1dLayer {
            weight: Tensor::param(
                kaiming_uniform(rng, c_out * c_in * kernel, c_in * kernel),
                &[c_out, c_in, kernel],
            )?,
            bias: Tensor::param(vec![T::zero(); c_out], &[c_out])?,
            stride,
            padding,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        F::conv_out_len(len, self.kernel_size(), self.stride, self.padding)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        F::conv1d(x, &self.weight, Some(&self.bias), self.stride, self.padding)
    }
}

impl<T: Scalar> Module<T> for Conv1dLayer<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        out.push(NamedTensor {
            name: join(prefix, "weight"),
            tensor: self.weight.clone(),
            role: Role::Param,
        });
        out.push(NamedTensor {
            name: join(prefix, "bias"),
            tensor: self.bias.clone(),
            role: Role::Param,
        });
    }
}

/// Batch normalisation over `(B, T)` per channel with running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm1dLayer<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> BatchNorm1dLayer<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(BatchNorm1dLayer {
            gamma: Tensor::param(vec![T::one(); channels], &[channels])?,
            beta: Tensor::param(vec![T::zero(); channels], &[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::full(&[channels], T::one())?,
            momentum: T::from_f64_lossy(0.1),
            eps: T::from_f64_lossy(1e-5),
        })
    }

    /// Train mode standardises with batch moments and folds them into the
    /// running estimates (`running <- (1 - m) running + m batch`, with the
    /// unbiased batch variance); eval mode uses the running estimates only.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => {
                let (y, moments) =
                    F::batch_norm1d(x, &self.gamma, &self.beta, BnStats::Batch, self.eps)?;
                let moments = moments.expect("batch statistics requested");
                let m = self.momentum;
                let n = T::from_usize(moments.count).unwrap();
                let bessel = n / (n - T::one());
                for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&moments.mean) {
                    *r = (T::one() - m) * *r + m * b;
                }
                for (r, &b) in self
                    .running_var
                    .data_mut()
                    .iter_mut()
                    .zip(&moments.var_biased)
                {
                    *r = (T::one() - m) * *r + m * b * bessel;
                }
                Ok(y)
            }
            Mode::Eval => {
                let mean = self.running_mean.data();
                let var = self.running_var.data();
                let stats = BnStats::Running {
                    mean: &mean,
                    var: &var,
                };
                Ok(F::batch_norm1d(x, &self.gamma, &self.beta, stats, self.eps)?.0)
            }
        }
    }
}

impl<T: Scalar> Module<T> for BatchNorm1dLayer<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        out.push(NamedTensor {
            name: join(prefix, "gamma"),
            tensor: self.gamma.clone(),
            role: Role::Param,
        });
        out.push(NamedTensor {
            name: join(prefix, "beta"),
            tensor: self.beta.clone(),
            role: Role::Param,
        });
        out.push(NamedTensor {
            name: join(prefix, "running_mean"),
            tensor: self.running_mean.clone(),
            role: Role::Buffer,
        });
        out.push(NamedTensor {
            name: join(prefix, "running_var"),
            tensor: self.running_var.clone(),
            role: Role::Buffer,
        });
    }
}

#[derive(Debug, Clone)]
pub struct LinearLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn new(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("linear", "feature counts must be positive"));
        }
        Ok(LinearLayer {
            weight: Tensor::param(kaiming_uniform(rng, d_out * d_in, d_in), &[d_out, d_in])?,
            bias: Tensor::param(vec![T::zero(); d_out], &[d_out])?,
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        F::linear(x, &self.weight, &self.bias)
    }
}

impl<T: Scalar> Module<T> for LinearLayer<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        out.push(NamedTensor {
            name: join(prefix, "weight"),
            tensor: self.weight.clone(),
            role: Role::Param,
        });
        out.push(NamedTensor {
            name: join(prefix, "bias"),
            tensor: self.bias.clone(),
            role: Role::Param,
        });
    }
}

/// Two conv + batch-norm stages with a shortcut:
/// `relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))`.
///
/// The shortcut is the identity when channels and stride are unchanged, a
/// strided 1x1 convolution plus batch norm otherwise.
#[derive(Debug, Clone)]
pub struct ResidualBlock1d<T: Scalar> {
    pub conv1: Conv1dLayer<T>,
    pub bn1: BatchNorm1dLayer<T>,
    pub conv2: Conv1dLayer<T>,
    pub bn2: BatchNorm1dLayer<T>,
    pub shortcut: Option<(Conv1dLayer<T>, BatchNorm1dLayer<T>)>,
}

impl<T: Scalar> ResidualBlock1d<T> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        stride: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::invalid(
                "residual_block",
                format!("kernel {kernel} must be odd to keep lengths aligned"),
            ));
        }
        let pad = kernel / 2;
        let conv1 = Conv1dLayer::new(c_in, c_out, kernel, stride, pad, rng)?;
        let conv2 = Conv1dLayer::new(c_out, c_out, kernel, 1, pad, rng)?;
        let shortcut = if c_in != c_out || stride != 1 {
            Some((
                Conv1dLayer::new(c_in, c_out, 1, stride, 0, rng)?,
                BatchNorm1dLayer::new(c_out)?,
            ))
        } else {
            None
        };
        Ok(ResidualBlock1d {
            conv1,
            bn1: BatchNorm1dLayer::new(c_out)?,
            conv2,
            bn2: BatchNorm1dLayer::new(c_out)?,
            shortcut,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        self.conv1.out_len(len).and_then(|l| self.conv2.out_len(l))
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = F::relu(&self.bn1.forward(&self.conv1.forward(x)?, mode)?);
        let main = self.bn2.forward(&self.conv2.forward(&h)?, mode)?;
        let skip = match &self.shortcut {
            Some((conv, bn)) => bn.forward(&conv.forward(x)?, mode)?,
            None => x.clone(),
        };
        if skip.shape() != main.shape() {
            return Err(Error::shape(
                "residual_block",
                format!(
                    "shortcut {:?} vs main path {:?}",
                    skip.shape(),
                    main.shape()
                ),
            ));
        }
        Ok(F::relu(&ops::add(&main, &skip)?))
    }
}

impl<T: Scalar> Module<T> for ResidualBlock1d<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        self.conv1.collect(&join(prefix, "conv1"), out);
        self.bn1.collect(&join(prefix, "bn1"), out);
        self.conv2.collect(&join(prefix, "conv2"), out);
        self.bn2.collect(&join(prefix, "bn2"), out);
        if let Some((conv, bn)) = &self.shortcut {
            conv.collect(&join(prefix, "shortcut.conv"), out);
            bn.collect(&join(prefix, "shortcut.bn"), out);
        }
    }
}

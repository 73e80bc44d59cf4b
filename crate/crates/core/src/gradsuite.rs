//! Finite-difference checks for every differentiable op and the composite
//! blocks built from them, in double precision over several seeds.

use std::collections::BTreeSet;

use rand::Rng;

use crate::autodiff::{gradcheck_leaves, ops, GradcheckReport, Graph, OpKind, Tensor};
use crate::error::Result;
use crate::nn::{self, BnStats, Mode, Module, ResidualBlock1d};
use crate::rng::{seeded, Rng as SeededRng};
use crate::sca::ScaModule;

pub const OP_TOL: f64 = 1e-5;
pub const COMPOSITE_TOL: f64 = 1e-4;
pub const STEP: f64 = 1e-6;

/// Aggregate over all seeds of one check.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub composite: bool,
    pub tol: f64,
    pub seeds: usize,
    /// Worst relative error over every seed.
    pub max_rel_err: f64,
    pub checked: usize,
    pub passed: bool,
    /// Op kinds present in the checked graph.
    pub kinds: BTreeSet<OpKind>,
}

fn uniform(rng: &mut SeededRng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::param((0..n).map(|_| rng.random_range(lo..hi)).collect(), shape)
        .expect("shape is valid")
}

fn constant(rng: &mut SeededRng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape)
        .expect("shape is valid")
}

/// Contract an arbitrary output with fixed random weights to get a scalar.
fn project(out: &Tensor<f64>, probe: &Tensor<f64>) -> Result<Tensor<f64>> {
    Ok(ops::sum(&ops::mul(out, probe)?))
}

type Case =
    Box<dyn Fn(&mut SeededRng) -> Result<(Box<dyn Fn() -> Result<Tensor<f64>>>, Vec<Tensor<f64>>)>>;

fn case<F>(f: F) -> Case
where
    F: Fn(&mut SeededRng) -> Result<(Box<dyn Fn() -> Result<Tensor<f64>>>, Vec<Tensor<f64>>)>
        + 'static,
{
    Box::new(f)
}

type Probed = (Box<dyn Fn() -> Result<Tensor<f64>>>, Vec<Tensor<f64>>);

/// A checkable function of its leaves, reduced to a scalar by a random probe.
fn probed(
    rng: &mut SeededRng,
    out_shape: &[usize],
    leaves: Vec<Tensor<f64>>,
    f: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>> + 'static,
) -> Probed {
    let probe = constant(rng, out_shape);
    let ls = leaves.clone();
    (Box::new(move || project(&f(&ls)?, &probe)), leaves)
}

fn cases() -> Vec<(&'static str, bool, Case)> {
    vec![
        (
            "conv1d",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 9], -1.0, 1.0);
                let w = uniform(r, &[4, 3, 3], -1.0, 1.0);
                let b = uniform(r, &[4], -1.0, 1.0);
                Ok(probed(r, &[2, 4, 5], vec![x, w, b], |l| {
                    nn::conv1d(&l[0], &l[1], Some(&l[2]), 2, 1)
                }))
            }),
        ),
        (
            "batchnorm_train",
            false,
            case(|r| {
                let x = uniform(r, &[3, 4, 5], -2.0, 2.0);
                let g = uniform(r, &[4], 0.5, 1.5);
                let b = uniform(r, &[4], -1.0, 1.0);
                Ok(probed(r, &[3, 4, 5], vec![x, g, b], |l| {
                    Ok(nn::batch_norm1d(&l[0], &l[1], &l[2], BnStats::Batch, 1e-5)?.0)
                }))
            }),
        ),
        (
            "batchnorm_eval",
            false,
            case(|r| {
                let x = uniform(r, &[3, 4, 5], -2.0, 2.0);
                let g = uniform(r, &[4], 0.5, 1.5);
                let b = uniform(r, &[4], -1.0, 1.0);
                let mean: Vec<f64> = (0..4).map(|_| r.random_range(-0.5..0.5)).collect();
                let var: Vec<f64> = (0..4).map(|_| r.random_range(0.5..2.0)).collect();
                Ok(probed(r, &[3, 4, 5], vec![x, g, b], move |l| {
                    let stats = BnStats::Running {
                        mean: &mean,
                        var: &var,
                    };
                    Ok(nn::batch_norm1d(&l[0], &l[1], &l[2], stats, 1e-5)?.0)
                }))
            }),
        ),
        (
            "relu",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 7], -1.0, 1.0);
                Ok(probed(r, &[2, 3, 7], vec![x], |l| Ok(nn::relu(&l[0]))))
            }),
        ),
        (
            "sigmoid",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 7], -4.0, 4.0);
                Ok(probed(r, &[2, 3, 7], vec![x], |l| Ok(nn::sigmoid(&l[0]))))
            }),
        ),
        (
            "linear",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 6], -1.0, 1.0);
                let w = uniform(r, &[5, 6], -1.0, 1.0);
                let b = uniform(r, &[5], -1.0, 1.0);
                Ok(probed(r, &[2, 3, 5], vec![x, w, b], |l| {
                    nn::linear(&l[0], &l[1], &l[2])
                }))
            }),
        ),
        (
            "avg_pool_time",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 7], -1.0, 1.0);
                Ok(probed(r, &[2, 3, 1], vec![x], |l| nn::avg_pool_time(&l[0])))
            }),
        ),
        (
            "avg_pool_channel",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 7], -1.0, 1.0);
                Ok(probed(r, &[2, 1, 7], vec![x], |l| {
                    nn::avg_pool_channel(&l[0])
                }))
            }),
        ),
        (
            "global_avg_pool",
            false,
            case(|r| {
                let x = uniform(r, &[2, 3, 7], -1.0, 1.0);
                Ok(probed(r, &[2, 3], vec![x], |l| nn::global_avg_pool(&l[0])))
            }),
        ),
        (
            "softmax",
            false,
            case(|r| {
                let x = uniform(r, &[3, 5], -3.0, 3.0);
                Ok(probed(r, &[3, 5], vec![x], |l| nn::softmax(&l[0])))
            }),
        ),
        (
            "softmax_cross_entropy",
            false,
            case(|r| {
                let x = uniform(r, &[4, 5], -3.0, 3.0);
                let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..5)).collect();
                let ls = vec![x];
                let l2 = ls.clone();
                Ok((
                    Box::new(move || nn::cross_entropy(&l2[0], &labels))
                        as Box<dyn Fn() -> Result<Tensor<f64>>>,
                    ls,
                ))
            }),
        ),
        (
            "elementwise",
            false,
            case(|r| {
                let a = uniform(r, &[2, 3, 4], -1.0, 1.0);
                let b = uniform(r, &[2, 3, 4], -1.0, 1.0);
                let gc = uniform(r, &[2, 3, 1], -1.0, 1.0);
                let gt = uniform(r, &[2, 1, 4], -1.0, 1.0);
                let ls = vec![a, b, gc, gt];
                let l2 = ls.clone();
                let f = move || {
                    let s = ops::add(&l2[0], &ops::scale(&l2[1], 0.7))?;
                    let p = ops::mul(&s, &l2[1])?;
                    let q = ops::mul_broadcast(&ops::mul_broadcast(&p, &l2[2])?, &l2[3])?;
                    ops::weighted_sum(&[ops::sum(&q), ops::mean(&s)], &[1.3, -0.4])
                };
                Ok((Box::new(f) as Box<dyn Fn() -> Result<Tensor<f64>>>, ls))
            }),
        ),
        (
            "residual_block",
            true,
            case(|r| {
                let block = ResidualBlock1d::<f64>::new(3, 4, 2, 3, r)?;
                let x = uniform(r, &[3, 3, 10], -1.0, 1.0);
                let mut leaves = vec![x];
                leaves.extend(block.parameters());
                Ok(probed(r, &[3, 4, 5], leaves, move |l| {
                    block.forward(&l[0], Mode::Train)
                }))
            }),
        ),
        (
            "residual_block_identity",
            true,
            case(|r| {
                let block = ResidualBlock1d::<f64>::new(4, 4, 1, 3, r)?;
                let x = uniform(r, &[3, 4, 6], -1.0, 1.0);
                let mut leaves = vec![x];
                leaves.extend(block.parameters());
                Ok(probed(r, &[3, 4, 6], leaves, move |l| {
                    block.forward(&l[0], Mode::Eval)
                }))
            }),
        ),
        (
            "sca",
            true,
            case(|r| {
                let sca = ScaModule::<f64>::new(8, 6, 4, r)?;
                let x = uniform(r, &[2, 8, 6], -1.0, 1.0);
                let mut leaves = vec![x];
                leaves.extend(sca.parameters());
                Ok(probed(r, &[2, 8, 6], leaves, move |l| sca.forward(&l[0])))
            }),
        ),
    ]
}

/// Names of every check in [`run`], in order.
pub fn check_names() -> Vec<&'static str> {
    cases().into_iter().map(|(n, _, _)| n).collect()
}

/// Run every check over `seeds` seeds derived from `master`.
pub fn run(master: u64, seeds: usize) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for (idx, (name, composite, make)) in cases().into_iter().enumerate() {
        let tol = if composite { COMPOSITE_TOL } else { OP_TOL };
        let mut entry = SuiteEntry {
            name,
            composite,
            tol,
            seeds,
            max_rel_err: 0.0,
            checked: 0,
            passed: true,
            kinds: BTreeSet::new(),
        };
        for s in 0..seeds {
            let mut rng = seeded(master, &[idx as u64, s as u64]);
            let (f, leaves) = make(&mut rng)?;
            entry.kinds.extend(Graph::trace(&f()?).kinds());
            let rep: GradcheckReport = gradcheck_leaves(&f, &leaves, STEP, tol)?;
            entry.max_rel_err = entry.max_rel_err.max(rep.max_rel_err);
            entry.checked += rep.checked;
            entry.passed &= rep.passed;
        }
        out.push(entry);
    }
    Ok(out)
}

/// Op kinds not exercised by any entry.
pub fn uncovered(entries: &[SuiteEntry]) -> Vec<OpKind> {
    let seen: BTreeSet<OpKind> = entries
        .iter()
        .flat_map(|e| e.kinds.iter().copied())
        .collect();
    OpKind::ALL
        .into_iter()
        .filter(|k| !seen.contains(k))
        .collect()
}

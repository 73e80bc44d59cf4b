use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::gradnorm::{gradnorm_step, TaskWeights};
use super::metrics::MetricsReport;
use super::optim::{Adam, AdamConfig};
use crate::autodiff::{ops, Tensor};
use crate::dsp::Activity;
use crate::error::{Error, Result};
use crate::model::{Dt4EcgModel, ModelConfig, SharedScope};
use crate::nn;
use crate::rng::seeded;
use crate::synthecg::{LabeledSegment, SegmentDataset, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gradnorm: bool,
    pub alpha: f64,
    pub renormalize: bool,
    pub shared_scope: SharedScope,
    pub seed: u64,
    /// Batch size for scoring passes; does not affect results.
    pub eval_batch_size: usize,
    /// Score the test split after every epoch.
    pub eval_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            lr: 1e-3,
            gradnorm: true,
            alpha: 2.0,
            renormalize: false,
            shared_scope: SharedScope::LastStage,
            seed: 0,
            eval_batch_size: 64,
            eval_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config(
                "train: epochs and batch sizes must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(
                "train: lr must be positive and alpha finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss_id: f64,
    pub loss_act: f64,
    pub w_id: f64,
    pub w_act: f64,
    pub g_id: f64,
    pub g_act: f64,
    pub acc_id_train: f64,
    pub acc_act_train: f64,
    pub acc_id_test: f64,
    pub acc_act_test: f64,
    pub seconds: f64,
}

/// Task weights after, and gradient norms during, one optimiser step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub w: [f64; 2],
    pub g: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
    pub steps: Vec<StepRecord>,
}

pub const CSV_HEADER: &str =
    "epoch,loss_id,loss_act,w_id,w_act,g_id,g_act,acc_id_train,acc_act_train,acc_id_test,acc_act_test,seconds";

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
                r.epoch,
                r.loss_id,
                r.loss_act,
                r.w_id,
                r.w_act,
                r.g_id,
                r.g_act,
                r.acc_id_train,
                r.acc_act_train,
                r.acc_id_test,
                r.acc_act_test,
                r.seconds
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// The log with wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> TrainLog {
        let mut out = self.clone();
        out.rows.iter_mut().for_each(|r| r.seconds = 0.0);
        out
    }
}

/// A stacked batch ready for the model.
pub struct Batch {
    pub x: Tensor<f32>,
    pub id: Vec<usize>,
    pub activity: Vec<usize>,
}

pub fn make_batch(segments: &[&LabeledSegment], input_len: usize) -> Result<Batch> {
    let mut data = Vec::with_capacity(segments.len() * input_len);
    for s in segments {
        if s.samples.len() != input_len {
            return Err(Error::shape(
                "make_batch",
                format!(
                    "segment has {} samples, model expects {input_len}",
                    s.samples.len()
                ),
            ));
        }
        data.extend_from_slice(&s.samples);
    }
    Ok(Batch {
        x: Tensor::new(data, &[segments.len(), 1, input_len])?,
        id: segments.iter().map(|s| usize::from(s.subject_id)).collect(),
        activity: segments.iter().map(|s| s.activity.index()).collect(),
    })
}

fn argmax_rows(logits: &Tensor<f32>) -> Vec<usize> {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > row[best] { i } else { best })
        })
        .collect()
}

fn count_correct(pred: &[usize], truth: &[usize]) -> usize {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count()
}

/// Metrics for both heads on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub id: MetricsReport,
    pub activity: MetricsReport,
}

/// Score `segments` in eval mode; the model's mode is restored afterwards.
pub fn evaluate(
    model: &mut Dt4EcgModel<f32>,
    segments: &[&LabeledSegment],
    batch_size: usize,
) -> Result<EvalReport> {
    if segments.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty split".into()));
    }
    let prev = model.mode;
    model.eval();
    let result = (|| {
        let (mut pid, mut tid, mut pact, mut tact) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for chunk in segments.chunks(batch_size.max(1)) {
            let b = make_batch(chunk, model.config.input_len)?;
            let (id, act) = model.forward(&b.x)?;
            pid.extend(argmax_rows(&id));
            pact.extend(argmax_rows(&act));
            tid.extend(b.id);
            tact.extend(b.activity);
        }
        Ok(EvalReport {
            id: MetricsReport::from_predictions(model.config.n_subjects, &tid, &pid)?,
            activity: MetricsReport::from_predictions(model.config.n_activities, &tact, &pact)?,
        })
    })();
    model.mode = prev;
    result
}

fn check_dataset(model: &Dt4EcgModel<f32>, ds: &SegmentDataset) -> Result<()> {
    let n_sub = ds.n_subjects();
    if n_sub > model.config.n_subjects {
        return Err(Error::Config(format!(
            "dataset has {n_sub} subjects, model head has {}",
            model.config.n_subjects
        )));
    }
    if model.config.n_activities != Activity::ALL.len() {
        return Err(Error::Config(format!(
            "model.n_activities must be {}",
            Activity::ALL.len()
        )));
    }
    let train = ds.split(Split::Train);
    for sub in 0..n_sub {
        if !train.iter().any(|s| usize::from(s.subject_id) == sub) {
            return Err(Error::Dataset(format!(
                "train split has no segments for subject {sub}"
            )));
        }
    }
    for a in Activity::ALL {
        if !train.iter().any(|s| s.activity == a) {
            return Err(Error::Dataset(format!(
                "train split has no {} segments",
                a.name()
            )));
        }
    }
    Ok(())
}

pub fn train(
    model: &mut Dt4EcgModel<f32>,
    ds: &SegmentDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    train_with(model, ds, cfg, |_| {})
}

/// [`train`] with a callback after each epoch.
pub fn train_with(
    model: &mut Dt4EcgModel<f32>,
    ds: &SegmentDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRow),
) -> Result<TrainLog> {
    cfg.validate()?;
    check_dataset(model, ds)?;
    let train_set = ds.split(Split::Train);
    let test_set = ds.split(Split::Test);
    let mut adam = Adam::for_module(
        model,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut weights = TaskWeights::new(2, cfg.alpha, cfg.renormalize);
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        model.train();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seeded(cfg.seed, &[0x7368_7566, epoch as u64]));
        let (mut loss_sum, mut g_sum) = ([0.0f64; 2], [0.0f64; 2]);
        let (mut correct_id, mut correct_act, mut steps) = (0usize, 0usize, 0usize);

        for idx in order.chunks(cfg.batch_size) {
            let segs: Vec<&LabeledSegment> = idx.iter().map(|&i| train_set[i]).collect();
            let b = make_batch(&segs, model.config.input_len)?;
            let (total, losses, norms, id_logits, act_logits) = if cfg.gradnorm {
                let s = gradnorm_step(
                    model,
                    &b.x,
                    &b.id,
                    &b.activity,
                    &mut weights,
                    cfg.shared_scope,
                )?;
                (s.total, s.losses, s.norms, s.id_logits, s.activity_logits)
            } else {
                let (id_logits, act_logits) = model.forward(&b.x)?;
                let l_id = nn::cross_entropy(&id_logits, &b.id)?;
                let l_act = nn::cross_entropy(&act_logits, &b.activity)?;
                let losses = [f64::from(l_id.item()), f64::from(l_act.item())];
                (
                    ops::add(&l_id, &l_act)?,
                    losses,
                    [0.0; 2],
                    id_logits,
                    act_logits,
                )
            };
            if !total.all_finite() {
                return Err(Error::NonFinite(format!("total loss at epoch {epoch}")));
            }
            adam.zero_grad();
            total.backward()?;
            adam.step()?;

            correct_id += count_correct(&argmax_rows(&id_logits), &b.id);
            correct_act += count_correct(&argmax_rows(&act_logits), &b.activity);
            for t in 0..2 {
                loss_sum[t] += losses[t];
                g_sum[t] += norms[t];
            }
            steps += 1;
            log.steps.push(StepRecord {
                w: [weights.w[0], weights.w[1]],
                g: norms,
            });
        }

        let (acc_id_test, acc_act_test) = if cfg.eval_each_epoch && !test_set.is_empty() {
            let r = evaluate(model, &test_set, cfg.eval_batch_size)?;
            (r.id.accuracy, r.activity.accuracy)
        } else {
            (f64::NAN, f64::NAN)
        };
        let n = train_set.len() as f64;
        let row = EpochRow {
            epoch,
            loss_id: loss_sum[0] / steps as f64,
            loss_act: loss_sum[1] / steps as f64,
            w_id: weights.w[0],
            w_act: weights.w[1],
            g_id: g_sum[0] / steps as f64,
            g_act: g_sum[1] / steps as f64,
            acc_id_train: correct_id as f64 / n,
            acc_act_train: correct_act as f64 / n,
            acc_id_test,
            acc_act_test,
            seconds: started.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {epoch}: loss {:.4}/{:.4} w {:.4}/{:.4} train {:.3}/{:.3} test {:.3}/{:.3} ({:.1}s)",
            row.loss_id,
            row.loss_act,
            row.w_id,
            row.w_act,
            row.acc_id_train,
            row.acc_act_train,
            row.acc_id_test,
            row.acc_act_test,
            row.seconds
        );
        on_epoch(&row);
        log.rows.push(row);
    }
    model.eval();
    Ok(log)
}

/// One cell of the attention x GradNorm grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub sca: bool,
    pub gradnorm: bool,
}

impl Variant {
    pub const GRID: [Variant; 4] = [
        Variant {
            sca: true,
            gradnorm: true,
        },
        Variant {
            sca: true,
            gradnorm: false,
        },
        Variant {
            sca: false,
            gradnorm: true,
        },
        Variant {
            sca: false,
            gradnorm: false,
        },
    ];

    pub fn name(&self) -> String {
        format!(
            "sca={},gradnorm={}",
            on_off(self.sca),
            on_off(self.gradnorm)
        )
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: Variant,
    pub log: TrainLog,
    pub test: EvalReport,
}

/// Train every variant from the same seeds and score it on the test split.
/// Variants run on separate threads when `parallel` is set.
pub fn ablate(
    ds: &SegmentDataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    variants: &[Variant],
    parallel: bool,
) -> Result<Vec<AblationRun>> {
    let run = |v: Variant| -> Result<AblationRun> {
        let mut model = Dt4EcgModel::<f32>::new(ModelConfig {
            use_sca: v.sca,
            ..model_cfg.clone()
        })?;
        let cfg = TrainConfig {
            gradnorm: v.gradnorm,
            ..train_cfg.clone()
        };
        let log = train(&mut model, ds, &cfg)?;
        let test = evaluate(&mut model, &ds.split(Split::Test), cfg.eval_batch_size)?;
        Ok(AblationRun {
            variant: v,
            log,
            test,
        })
    };
    if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = variants.iter().map(|&v| s.spawn(move || run(v))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .map_err(|_| Error::invalid("ablate", "a variant thread panicked"))?
                })
                .collect()
        })
    } else {
        variants.iter().map(|&v| run(v)).collect()
    }
}

/// Plain-text comparison table, one row per variant.
pub fn ablation_table(runs: &[AblationRun]) -> String {
    let mut s = String::from("variant                  id_acc  id_f1   act_acc act_f1  epochs\n");
    for r in runs {
        let _ = writeln!(
            s,
            "{:<24} {:.4}  {:.4}  {:.4}  {:.4}  {}",
            r.variant.name(),
            r.test.id.accuracy,
            r.test.id.f1,
            r.test.activity.accuracy,
            r.test.activity.f1,
            r.log.rows.len()
        );
    }
    s
}

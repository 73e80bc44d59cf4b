//! Optimisation and evaluation: Adam, GradNorm task weighting, the training
//! loop with its per-epoch log, classification metrics and the ablation grid.

mod gradnorm;
mod metrics;
mod optim;
mod trainer;

pub use gradnorm::{gradnorm_step, GradNormStep, TaskWeights, WeightUpdate};
pub use metrics::{ClassMetrics, MetricsReport};
pub use optim::{Adam, AdamConfig};
pub use trainer::{
    ablate, ablation_table, evaluate, make_batch, train, train_with, AblationRun, Batch, EpochRow,
    EvalReport, StepRecord, TrainConfig, TrainLog, Variant, CSV_HEADER,
};

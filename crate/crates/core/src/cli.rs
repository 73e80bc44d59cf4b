//! Run configuration and the command implementations behind the `dt4ecg` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dsp::DspConfig;
use crate::error::{Error, Result};
use crate::gradsuite;
use crate::model::{load_checkpoint, save_checkpoint, Dt4EcgModel, ModelConfig};
use crate::rng::derive_seed;
use crate::synthecg::{build_dataset, DatasetSpec, SegmentDataset, Split};
use crate::train::{self, ablate, ablation_table, evaluate, EvalReport, TrainConfig, Variant};

pub const DATASET_FILE: &str = "dataset.dtds";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.dt4e";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ABLATION_FILE: &str = "ablation.json";
pub const ABLATION_CURVES_FILE: &str = "ablation_curves.csv";
pub const CONFIG_FILE: &str = "config.json";

/// Everything one experiment needs. The top-level `seed` replaces the seeds
/// of the dataset, model and trainer sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Dataset file for `train`, `eval` and `ablate`; defaults to `<out_dir>/dataset.dtds`.
    pub dataset_path: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub dsp: DspConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Train the ablation variants on parallel threads.
    pub ablate_parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            dataset_path: None,
            dataset: DatasetSpec::default(),
            dsp: DspConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ablate_parallel: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Push the master seed into every section and check the sections agree.
    pub fn resolved(mut self) -> Result<Self> {
        self.dataset.seed = self.seed;
        self.model.seed = derive_seed(self.seed, &[1]);
        self.train.seed = derive_seed(self.seed, &[2]);
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.dsp.filter(self.dataset.fs)?;
        if self.model.input_len != self.dsp.window_samples {
            return Err(Error::Config(format!(
                "model.input_len {} differs from dsp.window_samples {}",
                self.model.input_len, self.dsp.window_samples
            )));
        }
        if self.model.n_subjects < self.dataset.n_subjects {
            return Err(Error::Config(format!(
                "model.n_subjects {} is smaller than dataset.n_subjects {}",
                self.model.n_subjects, self.dataset.n_subjects
            )));
        }
        Ok(self)
    }

    pub fn dataset_file(&self) -> PathBuf {
        self.dataset_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join(DATASET_FILE))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dt4ecg",
    version,
    about = "Dual-task ECG identification and activity recognition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a configuration template with every default filled in.
    Init(Common),
    /// Synthesise, preprocess and split the dataset.
    Gen(Common),
    /// Train a model and save its checkpoint and log.
    Train(Common),
    /// Score a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to score; defaults to `<out>/checkpoint.dt4e`.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Train the attention x GradNorm grid and compare.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Train every variant twice and fail if the two runs differ.
        #[arg(long)]
        verify: bool,
    },
    /// Finite-difference check of every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Process exit code for an error: 2 for bad input or missing files, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::Format { .. }
        | Error::Dataset(_) => 2,
        _ => 1,
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.resolved()
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        Error::Config(format!(
            "cannot create output directory {}: {e}",
            cfg.out_dir.display()
        ))
    })
}

fn load_dataset(cfg: &RunConfig) -> Result<SegmentDataset> {
    let path = cfg.dataset_file();
    if !path.exists() {
        return Err(Error::Dataset(format!(
            "dataset file {} not found; run `gen` first",
            path.display()
        )));
    }
    SegmentDataset::load(&path)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_init(c: &Common) -> Result<String> {
    let mut cfg = RunConfig::default();
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let mut text = serde_json::to_string_pretty(&cfg)?;
    text.push('\n');
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), &text)?;
        return Ok(format!("wrote {}", dir.join(CONFIG_FILE).display()));
    }
    Ok(text)
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(cfg)?;
    let ds = build_dataset(&cfg.dataset, &cfg.dsp)?;
    let path = cfg.dataset_file();
    ds.save(&path)?;
    let manifest = ds.manifest(&cfg.dataset, &cfg.dsp);
    write_json(&cfg.out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(format!(
        "wrote {} segments ({} train, {} test) to {}",
        manifest.total,
        manifest.train,
        manifest.test,
        path.display()
    ))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    ensure_out_dir(cfg)?;
    let mut model = Dt4EcgModel::<f32>::new(cfg.model.clone())?;
    let log = train::train(&mut model, &ds, &cfg.train)?;
    save_checkpoint(&model, cfg.out_dir.join(CHECKPOINT_FILE))?;
    log.write_csv(cfg.out_dir.join(TRAIN_LOG_FILE))?;
    let report = evaluate(
        &mut model,
        &ds.split(Split::Test),
        cfg.train.eval_batch_size,
    )?;
    write_json(&cfg.out_dir.join(METRICS_FILE), &report)?;
    Ok(summary(&report))
}

fn summary(r: &EvalReport) -> String {
    format!(
        "identity: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}\n\
         activity: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}",
        r.id.accuracy,
        r.id.precision,
        r.id.recall,
        r.id.f1,
        r.activity.accuracy,
        r.activity.precision,
        r.activity.recall,
        r.activity.f1
    )
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
    if !path.exists() {
        return Err(Error::Config(format!(
            "checkpoint {} not found",
            path.display()
        )));
    }
    let mut model = load_checkpoint(&path)?;
    let stored = ModelConfig {
        seed: cfg.model.seed,
        ..model.config.clone()
    };
    if stored != cfg.model {
        return Err(Error::Config(format!(
            "checkpoint {} was trained with a different model configuration than the run config",
            path.display()
        )));
    }
    ensure_out_dir(cfg)?;
    let report = evaluate(
        &mut model,
        &ds.split(Split::Test),
        cfg.train.eval_batch_size,
    )?;
    write_json(&cfg.out_dir.join(METRICS_FILE), &report)?;
    Ok(summary(&report))
}

pub fn cmd_ablate(cfg: &RunConfig, verify: bool) -> Result<String> {
    let ds = load_dataset(cfg)?;
    ensure_out_dir(cfg)?;
    let runs = ablate(
        &ds,
        &cfg.model,
        &cfg.train,
        &Variant::GRID,
        cfg.ablate_parallel,
    )?;
    if verify {
        let again = ablate(
            &ds,
            &cfg.model,
            &cfg.train,
            &Variant::GRID,
            cfg.ablate_parallel,
        )?;
        for (a, b) in runs.iter().zip(&again) {
            if a.log.without_timing() != b.log.without_timing() || a.test != b.test {
                return Err(Error::invalid(
                    "ablate",
                    format!(
                        "variant {} diverged between identical runs",
                        a.variant.name()
                    ),
                ));
            }
        }
    }
    let mut curves =
        String::from("variant,epoch,acc_id_train,acc_act_train,acc_id_test,acc_act_test\n");
    for r in &runs {
        for row in &r.log.rows {
            curves.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.variant.name(),
                row.epoch,
                row.acc_id_train,
                row.acc_act_train,
                row.acc_id_test,
                row.acc_act_test
            ));
        }
    }
    fs::write(cfg.out_dir.join(ABLATION_CURVES_FILE), curves)?;
    write_json(&cfg.out_dir.join(ABLATION_FILE), &runs)?;
    Ok(ablation_table(&runs))
}

/// Returns the report and whether every check passed with full op coverage.
pub fn cmd_gradcheck(master: u64, seeds: usize) -> Result<(String, bool)> {
    let entries = gradsuite::run(master, seeds)?;
    let mut out = String::new();
    let mut ok = true;
    for e in &entries {
        ok &= e.passed;
        out.push_str(&format!(
            "{:<5} {:<24} max rel err {:.2e} (tol {:.0e}, {} seeds, {} entries)\n",
            if e.passed { "PASS" } else { "FAIL" },
            e.name,
            e.max_rel_err,
            e.tol,
            e.seeds,
            e.checked
        ));
    }
    let missing = gradsuite::uncovered(&entries);
    if !missing.is_empty() {
        ok = false;
        out.push_str(&format!("FAIL  op kinds never checked: {missing:?}\n"));
    }
    Ok((out, ok))
}

/// Dispatch a parsed command. `Ok(false)` means the command ran but a check failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Init(c) => println!("{}", cmd_init(&c)?.trim_end()),
        Command::Gen(c) => println!("{}", cmd_gen(&load_config(&c)?)?),
        Command::Train(c) => println!("{}", cmd_train(&load_config(&c)?)?),
        Command::Eval { common, checkpoint } => {
            println!(
                "{}",
                cmd_eval(&load_config(&common)?, checkpoint.as_deref())?
            )
        }
        Command::Ablate { common, verify } => {
            print!("{}", cmd_ablate(&load_config(&common)?, verify)?)
        }
        Command::Gradcheck { seeds, seed } => {
            let (report, ok) = cmd_gradcheck(seed, seeds)?;
            print!("{report}");
            return Ok(ok);
        }
    }
    Ok(true)
}

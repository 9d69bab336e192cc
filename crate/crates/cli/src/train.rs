//! Training loop: accumulated AdaX (or any configured optimizer) steps over
//! the shuffled training split with the step-decay schedule.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use csod_core::net::SodNet;
use csod_core::optim::{accumulate_and_step, schedule_lr, Optimizer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::{DatasetManifest, Sample, Split};
use crate::error::CliError;

pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.csod";
pub const CONFIG_RECORD: &str = "run.cfg";
pub const LOG_HEADER: &str = "epoch,step,lr,train_loss,wall_seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    /// Optimizer step, counted from 0 across the whole run.
    pub step: usize,
    pub lr: f64,
    /// Mean loss of the micro-batches accumulated into this step.
    pub train_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub rows: Vec<TrainLogRow>,
    pub epoch_means: Vec<f64>,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub net: SodNet,
}

pub fn format_log(rows: &[TrainLogRow]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:e},{},{:.3}", r.epoch, r.step, r.lr, r.train_loss, r.wall_seconds);
    }
    s
}

fn check_size(cfg: &RunConfig, m: &DatasetManifest) -> Result<(), CliError> {
    if m.size != cfg.net.input_size {
        return Err(CliError::Config(format!(
            "dataset images are {}x{} but net.input_size = {}",
            m.size, m.size, cfg.net.input_size
        )));
    }
    Ok(())
}

pub fn load_split(cfg: &RunConfig, split: Split) -> Result<Vec<Sample>, CliError> {
    let m = DatasetManifest::load(&cfg.data_root)?;
    check_size(cfg, &m)?;
    let samples = m.read_split(split)?;
    if samples.is_empty() {
        return Err(CliError::Usage(format!("the {} split of {} is empty", split.as_str(), cfg.data_root.display())));
    }
    Ok(samples)
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let samples = load_split(cfg, Split::Train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SodNet::new(&cfg.net, cfg.init, &mut rng)?;
    let mut opt = Optimizer::new(cfg.optimizer.with_alpha(cfg.base_lr), &net)?;
    let edge = cfg.net.edge_branch;

    let start = Instant::now();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rows = Vec::new();
    let mut epoch_means = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = schedule_lr(cfg.base_lr, epoch, cfg.epochs);
        opt.set_alpha(lr);
        order.shuffle(&mut rng);
        let batch: Vec<&Sample> = order.iter().map(|&i| &samples[i]).collect();
        let mut sum = 0.0;
        for chunk in batch.chunks(cfg.accumulation) {
            let step = rows.len();
            let loss = accumulate_and_step(&mut opt, &mut net, chunk, |n, s| {
                n.train_step(&s.image, &s.mask, edge.then_some(&s.edge))
            })
            .map_err(|e| CliError::Numeric(format!("epoch {epoch} step {step}: {e}")))?;
            if !loss.is_finite() {
                return Err(CliError::Numeric(format!("loss is {loss} at epoch {epoch} step {step}")));
            }
            sum += loss * chunk.len() as f64;
            rows.push(TrainLogRow { epoch, step, lr, train_loss: loss, wall_seconds: start.elapsed().as_secs_f64() });
        }
        epoch_means.push(sum / samples.len() as f64);
    }

    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let log = cfg.out_dir.join(LOG_FILE);
    fs::write(&log, format_log(&rows)).map_err(|e| CliError::io(&log, e))?;
    let record = cfg.out_dir.join(CONFIG_RECORD);
    fs::write(&record, cfg.to_text()).map_err(|e| CliError::io(&record, e))?;
    let ckpt = cfg.out_dir.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &net).map_err(|source| CliError::Checkpoint { path: ckpt.clone(), source })?;
    Ok(TrainOutcome { rows, epoch_means, checkpoint: ckpt, log, net })
}

/// Drops the wall-clock column, leaving what a rerun must reproduce exactly.
pub fn reproducible_columns(log: &str) -> String {
    log.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

pub fn load_checkpoint(path: &Path) -> Result<SodNet, CliError> {
    checkpoint::load(path).map_err(|source| CliError::Checkpoint { path: path.to_path_buf(), source })
}

//! Subcommand implementations, shared by the binary and the tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use csod_core::bench::{default_config, optbench, Task, Trace};
use csod_core::blocks::BlockParamCount;
use csod_core::metrics::{MetricsReport, PrOptions};
use csod_core::net::{closed_form_breakdown, decoder_param_ratio, NetConfig, ParamBreakdown, SodNet};
use csod_core::optim::{Algorithm, OptimizerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::{generate_dataset, DatasetManifest, Split};
use crate::error::CliError;
use crate::eval;
use crate::train::{self, TrainOutcome};

pub const THREADS_VAR: &str = "CSOD_THREADS";

/// Worker thread cap from `CSOD_THREADS`; 1 (deterministic mode) when unset.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn gen_data(seed: u64, size: usize, train: usize, test: usize, out: &Path) -> Result<DatasetManifest, CliError> {
    if size < csod_core::synth::MIN_SIZE {
        return Err(CliError::Usage(format!("--size must be at least {}", csod_core::synth::MIN_SIZE)));
    }
    generate_dataset(seed, size, train, test, out)
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    train::train(cfg)
}

pub struct EvalRequest {
    pub checkpoint: PathBuf,
    pub data_root: PathBuf,
    pub split: Split,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub pr: PrOptions,
}

impl EvalRequest {
    /// Paths taken from a run configuration: its checkpoint, dataset and output directory.
    pub fn from_config(cfg: &RunConfig, split: Split, threads: usize) -> Self {
        Self {
            checkpoint: cfg.out_dir.join(train::CHECKPOINT_FILE),
            data_root: cfg.data_root.clone(),
            split,
            out_dir: cfg.out_dir.clone(),
            threads,
            pr: PrOptions::default(),
        }
    }
}

pub fn eval(req: &EvalRequest) -> Result<MetricsReport, CliError> {
    let net = train::load_checkpoint(&req.checkpoint)?;
    let manifest = DatasetManifest::load(&req.data_root)?;
    if manifest.split(req.split).is_empty() {
        return Err(CliError::Usage(format!("the {} split of {} is empty", req.split.as_str(), req.data_root.display())));
    }
    if manifest.size != net.config().input_size {
        return Err(CliError::Data(format!(
            "dataset images are {0}x{0} but the checkpoint expects {1}x{1}",
            manifest.size,
            net.config().input_size
        )));
    }
    let samples = manifest.read_split(req.split)?;
    let preds = eval::predict(&net, &samples, req.threads)?;
    let report = eval::report(&preds, &samples, &req.pr)?;
    eval::write_outputs(&req.out_dir, req.split, &samples, &preds, &report)?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct CountReport {
    pub config: NetConfig,
    pub runtime: ParamBreakdown,
    pub plain_runtime: ParamBreakdown,
    pub closed_form: ParamBreakdown,
    pub plain_closed_form: ParamBreakdown,
    pub decoder_ratio: f64,
    pub checkpoint_bytes: usize,
    pub plain_checkpoint_bytes: usize,
}

impl CountReport {
    pub fn total(&self) -> usize {
        self.runtime.total().total
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let name = |c: &NetConfig| match (c.decoder.as_str(), c.se_enabled) {
            ("fire", true) => "fire+se",
            (d, _) => d,
        };
        let _ = writeln!(s, "{:<18}{:>14}{:>14}", "block", name(&self.config), "plain");
        let row = |s: &mut String, label: &str, a: BlockParamCount, b: BlockParamCount| {
            let _ = writeln!(s, "{label:<18}{:>14}{:>14}", a.total, b.total);
        };
        row(&mut s, "encoder", self.runtime.encoder, self.plain_runtime.encoder);
        for l in 0..self.config.levels() {
            let label = format!("decoder level {l} ({}ch)", self.config.stage_channels[l + 1]);
            row(&mut s, &label, self.runtime.levels[l], self.plain_runtime.levels[l]);
        }
        row(&mut s, "decoder total", self.runtime.decoder, self.plain_runtime.decoder);
        row(&mut s, "edge branch", self.runtime.edge, self.plain_runtime.edge);
        row(&mut s, "total", self.runtime.total(), self.plain_runtime.total());
        let _ = writeln!(s, "{:<18}{:>14}{:>14}", "checkpoint bytes", self.checkpoint_bytes, self.plain_checkpoint_bytes);
        let _ = writeln!(s, "decoder ratio: {:.4}", self.decoder_ratio);
        let agree = self.runtime == self.closed_form && self.plain_runtime == self.plain_closed_form;
        let _ = writeln!(s, "closed form agrees with runtime: {agree}");
        s
    }
}

pub fn count_params(cfg: &NetConfig) -> Result<CountReport, CliError> {
    let twin = cfg.plain_twin();
    let build = |c: &NetConfig| SodNet::new(c, Default::default(), &mut ChaCha8Rng::seed_from_u64(0));
    let (net, plain) = (build(cfg)?, build(&twin)?);
    Ok(CountReport {
        config: cfg.clone(),
        runtime: net.param_breakdown(),
        plain_runtime: plain.param_breakdown(),
        closed_form: closed_form_breakdown(cfg)?,
        plain_closed_form: closed_form_breakdown(&twin)?,
        decoder_ratio: decoder_param_ratio(cfg)?,
        checkpoint_bytes: checkpoint::encoded_len(&net),
        plain_checkpoint_bytes: checkpoint::encoded_len(&plain),
    })
}

pub fn default_iterations(task: &Task) -> usize {
    match task {
        Task::Quadratic { .. } => 500,
        Task::Rosenbrock => 5000,
        Task::MicroSod(_) => 40,
    }
}

pub fn bench_configs(task: &Task) -> Vec<OptimizerConfig> {
    Algorithm::COMPARED.iter().map(|&a| default_config(task, a)).collect()
}

pub fn optbench_csv(traces: &[Trace]) -> String {
    let mut s = String::from("iter");
    for t in traces {
        s.push(',');
        s.push_str(t.algorithm.name());
    }
    s.push('\n');
    let rows = traces.iter().map(|t| t.losses.len()).min().unwrap_or(0);
    for i in 0..rows {
        let _ = write!(s, "{i}");
        for t in traces {
            let _ = write!(s, ",{}", t.losses[i]);
        }
        s.push('\n');
    }
    s
}

pub fn run_optbench(task_name: &str, iterations: Option<usize>, seed: u64, out: &Path) -> Result<Vec<Trace>, CliError> {
    let task = Task::parse(task_name).ok_or_else(|| {
        CliError::Usage(format!("unknown task {task_name:?}; expected quadratic, rosenbrock or micro_sod"))
    })?;
    let iters = iterations.unwrap_or_else(|| default_iterations(&task));
    let traces = optbench(&task, &bench_configs(&task), iters, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(out, optbench_csv(&traces)).map_err(|e| CliError::io(out, e))?;
    Ok(traces)
}

pub fn optbench_summary(traces: &[Trace]) -> String {
    let mut s = String::new();
    for t in traces {
        let _ = writeln!(s, "{:<10} initial {:.6e} final {:.6e} decrease {:.2}%", t.algorithm.name(), t.initial(), t.last(), 100.0 * t.decrease());
    }
    let find = |a: Algorithm| traces.iter().find(|t| t.algorithm == a);
    if let (Some(x), Some(a)) = (find(Algorithm::Adax), find(Algorithm::Adam)) {
        let verdict = if x.last() < a.last() { "lower" } else { "not lower" };
        let _ = writeln!(s, "adax final loss is {verdict} than adam's");
    }
    s
}

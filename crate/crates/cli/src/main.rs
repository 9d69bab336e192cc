use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csod::commands::{self, EvalRequest};
use csod::config::RunConfig;
use csod::dataset::Split;
use csod::CliError;
use csod_core::metrics::{Averaging, PrOptions};

#[derive(Parser)]
#[command(name = "csod", version, about = "Compressed salient object detection at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic image/mask/edge corpus and its manifest.
    GenData {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 50)]
        test: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network as described by a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a checkpoint on a dataset split.
    Eval {
        /// Run configuration providing the checkpoint, dataset and output paths.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Pool pixel counts over images instead of averaging per image.
        #[arg(long)]
        micro: bool,
        /// Report precision 0 instead of 1 when nothing is predicted positive.
        #[arg(long)]
        empty_precision_zero: bool,
    },
    /// Parameter counts of the configured network and its plain-decoder twin.
    CountParams {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Loss traces of the six adaptive optimizers from a shared start.
    Optbench {
        #[arg(long)]
        task: String,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = commands::threads_from_env()?;
    match cli.command {
        Command::GenData { seed, size, train, test, out } => {
            let m = commands::gen_data(seed, size, train, test, &out)?;
            println!(
                "wrote {} samples ({} train, {} test) of {size}x{size} to {}",
                m.train.len() + m.test.len(),
                m.train.len(),
                m.test.len(),
                out.display()
            );
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = commands::train(&cfg)?;
            let first = outcome.epoch_means.first().copied().unwrap_or(f64::NAN);
            let last = outcome.epoch_means.last().copied().unwrap_or(f64::NAN);
            println!("{} steps, epoch mean loss {first:.4} -> {last:.4}", outcome.rows.len());
            println!("log {}, checkpoint {}", outcome.log.display(), outcome.checkpoint.display());
        }
        Command::Eval { config, checkpoint, data, out, split, micro, empty_precision_zero } => {
            let split = Split::parse(&split).ok_or_else(|| CliError::Usage(format!("--split must be train or test, got {split:?}")))?;
            let base = match &config {
                Some(p) => Some(RunConfig::load(p)?),
                None => None,
            };
            let mut req = match &base {
                Some(cfg) => EvalRequest::from_config(cfg, split, threads),
                None => {
                    let (Some(c), Some(d), Some(o)) = (&checkpoint, &data, &out) else {
                        return Err(CliError::Usage("eval needs --config or all of --checkpoint, --data, --out".into()));
                    };
                    EvalRequest { checkpoint: c.clone(), data_root: d.clone(), split, out_dir: o.clone(), threads, pr: PrOptions::default() }
                }
            };
            if let Some(c) = checkpoint {
                req.checkpoint = c;
            }
            if let Some(d) = data {
                req.data_root = d;
            }
            if let Some(o) = out {
                req.out_dir = o;
            }
            if micro {
                req.pr.averaging = Averaging::Micro;
            }
            if empty_precision_zero {
                req.pr.empty_precision = 0.0;
            }
            let r = commands::eval(&req)?;
            println!("maxf {:.4} mae {:.4} iou {:.4} smeasure {:.4}", r.max_f, r.mae, r.iou, r.s_measure);
        }
        Command::CountParams { config } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            print!("{}", commands::count_params(&cfg.net)?.to_table());
        }
        Command::Optbench { task, iters, seed, out } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("optbench_{task}.csv")));
            let traces = commands::run_optbench(&task, iters, seed, &out)?;
            print!("{}", commands::optbench_summary(&traces));
            println!("traces written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csod: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

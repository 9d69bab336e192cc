//! Evaluation of a trained network on a dataset split.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use csod_core::metrics::{evaluate, MetricsReport, PrOptions, SaliencyPair};
use csod_core::net::SodNet;
use csod_core::Tensor;

use crate::dataset::{Sample, Split};
use crate::error::CliError;
use crate::pnm;

pub const METRICS_FILE: &str = "metrics.csv";
pub const PR_FILE: &str = "pr_curve.csv";
pub const PRED_DIR: &str = "pred";

/// Final saliency maps for every sample, in input order. Work is split into
/// contiguous chunks over `threads` network copies.
pub fn predict(net: &SodNet, samples: &[Sample], threads: usize) -> Result<Vec<Tensor>, CliError> {
    let run = |chunk: &[Sample]| -> Result<Vec<Tensor>, CliError> {
        let mut net = net.clone();
        chunk.iter().map(|s| Ok(net.forward(&s.image)?.final_map)).collect()
    };
    if threads <= 1 || samples.len() < 2 {
        return run(samples);
    }
    let per = samples.len().div_ceil(threads);
    let parts: Vec<Result<Vec<Tensor>, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = samples.chunks(per).map(|c| scope.spawn(move || run(c))).collect();
        handles.into_iter().map(|h| h.join().expect("prediction worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(samples.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn report(preds: &[Tensor], samples: &[Sample], opts: &PrOptions) -> Result<MetricsReport, CliError> {
    let pairs = preds
        .iter()
        .zip(samples)
        .map(|(p, s)| SaliencyPair::from_tensors(p, &s.mask))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(evaluate(&pairs, opts)?)
}

pub fn metrics_csv(dataset: &str, r: &MetricsReport) -> String {
    format!("dataset,maxf,mae,iou,smeasure\n{dataset},{},{},{},{}\n", r.max_f, r.mae, r.iou, r.s_measure)
}

pub fn pr_csv(r: &MetricsReport) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in &r.pr_curve {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    s
}

pub fn write_outputs(
    out_dir: &Path,
    split: Split,
    samples: &[Sample],
    preds: &[Tensor],
    r: &MetricsReport,
) -> Result<(), CliError> {
    let pred_dir = out_dir.join(PRED_DIR);
    fs::create_dir_all(&pred_dir).map_err(|e| CliError::io(&pred_dir, e))?;
    for (s, p) in samples.iter().zip(preds) {
        let path = pred_dir.join(format!("pred_{:05}.pgm", s.id));
        pnm::write(&path, p).map_err(|source| CliError::Image { path, source })?;
    }
    let dataset = format!("synthetic_{}", split.as_str());
    for (name, text) in [(METRICS_FILE, metrics_csv(&dataset, r)), (PR_FILE, pr_csv(r))] {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

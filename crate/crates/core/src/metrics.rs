//! Saliency evaluation: PR curve, max F-measure, MAE, IOU and S-measure.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of binarization thresholds, `k / 256` for `k = 1..=255`.
pub const THRESHOLDS: usize = 255;
pub const BETA_SQ: f64 = 0.3;
pub const IOU_THRESHOLD: f64 = 0.5;
const GAMMA: f64 = 0.5;
const EPS: f64 = f64::EPSILON;

/// A predicted map in `[0, 1]` and its binary ground truth, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyPair {
    width: usize,
    height: usize,
    pred: Vec<f64>,
    gt: Vec<f64>,
}

impl SaliencyPair {
    pub fn new(width: usize, height: usize, pred: Vec<f64>, gt: Vec<f64>) -> Result<Self> {
        let len = width * height;
        if len == 0 || pred.len() != len || gt.len() != len {
            return Err(Error::invalid(
                "saliency pair",
                alloc::format!("{width}x{height} map with {} pred and {} gt values", pred.len(), gt.len()),
            ));
        }
        if let Some((index, &value)) = gt.iter().enumerate().find(|(_, &g)| g != 0.0 && g != 1.0) {
            return Err(Error::NonBinaryMask { index, value });
        }
        if let Some((index, &value)) = pred.iter().enumerate().find(|(_, &p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::TargetOutOfRange { index, value });
        }
        Ok(Self { width, height, pred, gt })
    }

    /// From single-item, single-channel tensors of equal shape.
    pub fn from_tensors(pred: &Tensor, gt: &Tensor) -> Result<Self> {
        let (ps, gs) = (pred.shape(), gt.shape());
        if ps != gs || ps.n != 1 || ps.c != 1 {
            return Err(Error::ShapeMismatch { op: "saliency pair", left: ps, right: gs });
        }
        Self::new(ps.w, ps.h, pred.data().to_vec(), gt.data().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn gt(&self) -> &[f64] {
        &self.gt
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Averaging {
    /// Precision and recall per image, then averaged.
    #[default]
    Macro,
    /// Pixel counts pooled over all images first.
    Micro,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PrOptions {
    pub averaging: Averaging,
    /// Precision reported when nothing is predicted positive.
    pub empty_precision: f64,
    /// Recall reported when the ground truth has no foreground.
    pub empty_recall: f64,
}

impl Default for PrOptions {
    fn default() -> Self {
        Self { averaging: Averaging::Macro, empty_precision: 1.0, empty_recall: 1.0 }
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub max_f: f64,
    pub mae: f64,
    pub iou: f64,
    pub s_measure: f64,
    pub pr_curve: Vec<PrPoint>,
}

pub fn threshold(k: usize) -> f64 {
    k as f64 / 256.0
}

fn nonempty(pairs: &[SaliencyPair], op: &'static str) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::Empty(op))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Default)]
struct Counts {
    tp: u64,
    fp: u64,
    pos: u64,
}

/// Confusion counts at every threshold for one pair. Index `k - 1` holds the
/// counts for `pred >= k / 256`.
fn threshold_counts(pair: &SaliencyPair) -> (Vec<Counts>, u64) {
    let mut fg = [0u64; 256];
    let mut bg = [0u64; 256];
    let mut pos = 0;
    for (&p, &g) in pair.pred.iter().zip(&pair.gt) {
        // 256 * p is exact, so bin >= k exactly when p >= k / 256.
        let bin = ((p * 256.0) as usize).min(255);
        if g == 1.0 {
            fg[bin] += 1;
            pos += 1;
        } else {
            bg[bin] += 1;
        }
    }
    let mut out = vec![Counts::default(); THRESHOLDS];
    let (mut tp, mut fp) = (0, 0);
    for k in (1..=THRESHOLDS).rev() {
        tp += fg[k];
        fp += bg[k];
        out[k - 1] = Counts { tp, fp, pos };
    }
    (out, pos)
}

fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

pub fn pr_curve(pairs: &[SaliencyPair], opts: &PrOptions) -> Result<Vec<PrPoint>> {
    nonempty(pairs, "pr_curve")?;
    let mut precision = vec![0.0; THRESHOLDS];
    let mut recall = vec![0.0; THRESHOLDS];
    let mut pooled = vec![Counts::default(); THRESHOLDS];
    for pair in pairs {
        let (counts, _) = threshold_counts(pair);
        for (k, c) in counts.iter().enumerate() {
            precision[k] += ratio(c.tp, c.tp + c.fp, opts.empty_precision);
            recall[k] += ratio(c.tp, c.pos, opts.empty_recall);
            pooled[k].tp += c.tp;
            pooled[k].fp += c.fp;
            pooled[k].pos += c.pos;
        }
    }
    let n = pairs.len() as f64;
    Ok((0..THRESHOLDS)
        .map(|k| {
            let (p, r) = match opts.averaging {
                Averaging::Macro => (precision[k] / n, recall[k] / n),
                Averaging::Micro => {
                    let c = pooled[k];
                    (ratio(c.tp, c.tp + c.fp, opts.empty_precision), ratio(c.tp, c.pos, opts.empty_recall))
                }
            };
            PrPoint { threshold: threshold(k + 1), precision: p, recall: r }
        })
        .collect())
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    let den = BETA_SQ * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + BETA_SQ) * precision * recall / den
    }
}

pub fn max_f_from_curve(curve: &[PrPoint]) -> f64 {
    curve.iter().map(|p| f_measure(p.precision, p.recall)).fold(0.0, f64::max)
}

pub fn max_f_measure(pairs: &[SaliencyPair], opts: &PrOptions) -> Result<f64> {
    Ok(max_f_from_curve(&pr_curve(pairs, opts)?))
}

pub fn mae(pairs: &[SaliencyPair]) -> Result<f64> {
    nonempty(pairs, "mae")?;
    let total: f64 = pairs
        .iter()
        .map(|p| p.pred.iter().zip(&p.gt).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.pred.len() as f64)
        .sum();
    Ok(total / pairs.len() as f64)
}

pub fn iou(pairs: &[SaliencyPair], threshold: f64) -> Result<f64> {
    nonempty(pairs, "iou")?;
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let (mut inter, mut union) = (0u64, 0u64);
            for (&s, &g) in p.pred.iter().zip(&p.gt) {
                let (s, g) = (s >= threshold, g == 1.0);
                inter += (s && g) as u64;
                union += (s || g) as u64;
            }
            ratio(inter, union, 1.0)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

pub fn s_measure(pairs: &[SaliencyPair]) -> Result<f64> {
    nonempty(pairs, "s_measure")?;
    Ok(pairs.iter().map(s_measure_one).sum::<f64>() / pairs.len() as f64)
}

/// Structure measure of one pair: `γ·S_o + (1−γ)·S_r`.
pub fn s_measure_one(pair: &SaliencyPair) -> f64 {
    let n = pair.gt.len() as f64;
    let fg = pair.gt.iter().sum::<f64>() / n;
    let mean_pred = pair.pred.iter().sum::<f64>() / n;
    let s = if fg == 0.0 {
        1.0 - mean_pred
    } else if fg == 1.0 {
        mean_pred
    } else {
        GAMMA * s_object(pair, fg) + (1.0 - GAMMA) * s_region(pair)
    };
    s.clamp(0.0, 1.0)
}

fn s_object(pair: &SaliencyPair, fg: f64) -> f64 {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (&p, &g) in pair.pred.iter().zip(&pair.gt) {
        if g == 1.0 {
            inside.push(p);
        } else {
            outside.push(1.0 - p);
        }
    }
    fg * object_score(&inside) + (1.0 - fg) * object_score(&outside)
}

fn object_score(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sigma = if values.len() < 2 {
        0.0
    } else {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    };
    2.0 * mean / (mean * mean + 1.0 + sigma + EPS)
}

/// Column/row split point: one past the rounded foreground centroid.
fn centroid(pair: &SaliencyPair) -> (usize, usize) {
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0.0);
    for (i, &g) in pair.gt.iter().enumerate() {
        if g == 1.0 {
            sx += (i % pair.width) as f64;
            sy += (i / pair.width) as f64;
            count += 1.0;
        }
    }
    // rint rounds half to even, as the reference implementation does.
    let x = libm::rint(sx / count) as usize + 1;
    let y = libm::rint(sy / count) as usize + 1;
    (x, y)
}

fn s_region(pair: &SaliencyPair) -> f64 {
    let (w, h) = (pair.width, pair.height);
    let (x, y) = centroid(pair);
    let area = (w * h) as f64;
    let quadrants = [(0, x, 0, y), (x, w, 0, y), (0, x, y, h), (x, w, y, h)];
    quadrants
        .iter()
        .map(|&(x0, x1, y0, y1)| {
            let cells = (x1 - x0) * (y1 - y0);
            if cells == 0 {
                return 0.0;
            }
            cells as f64 / area * region_ssim(pair, x0, x1, y0, y1)
        })
        .sum()
}

fn region_ssim(pair: &SaliencyPair, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let cells = || (y0..y1).flat_map(move |r| (x0..x1).map(move |c| r * pair.width + c));
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    let mx = cells().map(|i| pair.pred[i]).sum::<f64>() / n;
    let my = cells().map(|i| pair.gt[i]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    if n > 1.0 {
        for i in cells() {
            let (dx, dy) = (pair.pred[i] - mx, pair.gt[i] - my);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        sxx /= n - 1.0;
        syy /= n - 1.0;
        sxy /= n - 1.0;
    }
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn evaluate(pairs: &[SaliencyPair], opts: &PrOptions) -> Result<MetricsReport> {
    let pr_curve = pr_curve(pairs, opts)?;
    Ok(MetricsReport {
        max_f: max_f_from_curve(&pr_curve),
        mae: mae(pairs)?,
        iou: iou(pairs, IOU_THRESHOLD)?,
        s_measure: s_measure(pairs)?,
        pr_curve,
    })
}

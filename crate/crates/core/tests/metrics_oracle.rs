//! Every metric against a plain pixel-loop implementation written directly
//! from the definitions.

#[macro_use]
mod common;

use csod_core::metrics::{self, Averaging, PrOptions, SaliencyPair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 16;
type Map = Vec<Vec<f64>>;

fn random_pair(rng: &mut ChaCha8Rng) -> (Map, Map) {
    let style = rng.random_range(0..6);
    let (r0, r1) = { let a = rng.random_range(0..N); (a, rng.random_range(a..=N)) };
    let (c0, c1) = { let a = rng.random_range(0..N); (a, rng.random_range(a..=N)) };
    let gt: Map = (0..N)
        .map(|r| {
            (0..N)
                .map(|c| match style {
                    0 => 0.0,
                    1 => 1.0,
                    2 => rng.random_bool(0.3) as u8 as f64,
                    _ => ((r0..r1).contains(&r) && (c0..c1).contains(&c)) as u8 as f64,
                })
                .collect()
        })
        .collect();
    let quantized = rng.random_bool(0.3);
    let pred: Map = gt
        .iter()
        .map(|row| {
            row.iter()
                .map(|&g| {
                    let v: f64 = if rng.random_bool(0.5) { rng.random() } else { 0.6 * g + 0.4 * rng.random::<f64>() };
                    if quantized { (v * 255.0).round() / 255.0 } else { v }
                })
                .collect()
        })
        .collect();
    (pred, gt)
}

fn to_pair(pred: &Map, gt: &Map) -> SaliencyPair {
    let h = pred.len();
    let w = pred[0].len();
    SaliencyPair::new(w, h, pred.concat(), gt.concat()).unwrap()
}

fn oracle_pr(pairs: &[(Map, Map)], micro: bool) -> Vec<(f64, f64)> {
    (1..=255)
        .map(|k| {
            let tau = k as f64 / 256.0;
            let (mut ps, mut rs) = (0.0, 0.0);
            let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
            for (pred, gt) in pairs {
                let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
                for r in 0..pred.len() {
                    for c in 0..pred[r].len() {
                        let s = pred[r][c] >= tau;
                        let g = gt[r][c] == 1.0;
                        if s && g { tp += 1.0 }
                        if s && !g { fp += 1.0 }
                        if !s && g { fneg += 1.0 }
                    }
                }
                ps += if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
                rs += if tp + fneg == 0.0 { 1.0 } else { tp / (tp + fneg) };
                tp_all += tp;
                fp_all += fp;
                fn_all += fneg;
            }
            if micro {
                (
                    if tp_all + fp_all == 0.0 { 1.0 } else { tp_all / (tp_all + fp_all) },
                    if tp_all + fn_all == 0.0 { 1.0 } else { tp_all / (tp_all + fn_all) },
                )
            } else {
                (ps / pairs.len() as f64, rs / pairs.len() as f64)
            }
        })
        .collect()
}

fn oracle_maxf(pairs: &[(Map, Map)]) -> f64 {
    oracle_pr(pairs, false)
        .into_iter()
        .map(|(p, r)| if 0.3 * p + r == 0.0 { 0.0 } else { 1.3 * p * r / (0.3 * p + r) })
        .fold(f64::MIN, f64::max)
}

fn oracle_mae(pred: &Map, gt: &Map) -> f64 {
    let mut s = 0.0;
    for r in 0..pred.len() {
        for c in 0..pred[r].len() {
            s += (pred[r][c] - gt[r][c]).abs();
        }
    }
    s / (pred.len() * pred[0].len()) as f64
}

fn oracle_iou(pred: &Map, gt: &Map) -> f64 {
    let mut set_s = std::collections::BTreeSet::new();
    let mut set_g = std::collections::BTreeSet::new();
    for r in 0..pred.len() {
        for c in 0..pred[r].len() {
            if pred[r][c] >= 0.5 { set_s.insert((r, c)); }
            if gt[r][c] == 1.0 { set_g.insert((r, c)); }
        }
    }
    let union = set_s.union(&set_g).count();
    if union == 0 { 1.0 } else { set_s.intersection(&set_g).count() as f64 / union as f64 }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 { return 0.0 }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn oracle_ssim(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len() as f64;
    let (x, y) = (mean(pred), mean(gt));
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    if pred.len() > 1 {
        for i in 0..pred.len() {
            sx += (pred[i] - x).powi(2) / (n - 1.0);
            sy += (gt[i] - y).powi(2) / (n - 1.0);
            sxy += (pred[i] - x) * (gt[i] - y) / (n - 1.0);
        }
    }
    let a = 4.0 * x * y * sxy;
    let b = (x * x + y * y) * (sx + sy);
    if a != 0.0 { a / (b + f64::EPSILON) } else if b == 0.0 { 1.0 } else { 0.0 }
}

fn oracle_s(pred: &Map, gt: &Map) -> f64 {
    let (h, w) = (pred.len(), pred[0].len());
    let flat_g = gt.concat();
    let flat_p = pred.concat();
    let u = mean(&flat_g);
    if u == 0.0 { return (1.0 - mean(&flat_p)).clamp(0.0, 1.0) }
    if u == 1.0 { return mean(&flat_p).clamp(0.0, 1.0) }

    let obj = |vals: Vec<f64>| {
        let x = mean(&vals);
        2.0 * x / (x * x + 1.0 + sample_std(&vals) + f64::EPSILON)
    };
    let fg: Vec<f64> = (0..h * w).filter(|&i| flat_g[i] == 1.0).map(|i| flat_p[i]).collect();
    let bg: Vec<f64> = (0..h * w).filter(|&i| flat_g[i] == 0.0).map(|i| 1.0 - flat_p[i]).collect();
    let s_o = u * obj(fg) + (1.0 - u) * obj(bg);

    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if gt[r][c] == 1.0 { rows.push(r as f64); cols.push(c as f64); }
        }
    }
    let x = mean(&cols).round_ties_even() as usize + 1;
    let y = mean(&rows).round_ties_even() as usize + 1;
    let area = (h * w) as f64;
    let mut s_r = 0.0;
    for (rr, cr) in [(0..y, 0..x), (0..y, x..w), (y..h, 0..x), (y..h, x..w)] {
        let mut p = Vec::new();
        let mut g = Vec::new();
        for r in rr.clone() {
            for c in cr.clone() {
                p.push(pred[r][c]);
                g.push(gt[r][c]);
            }
        }
        if !p.is_empty() {
            s_r += p.len() as f64 / area * oracle_ssim(&p, &g);
        }
    }
    (0.5 * s_o + 0.5 * s_r).clamp(0.0, 1.0)
}

fn check(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs oracle {b}");
}

pub fn two_hundred_random_pairs_match_oracles() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let raw: Vec<(Map, Map)> = (0..200).map(|_| random_pair(&mut rng)).collect();
    let pairs: Vec<SaliencyPair> = raw.iter().map(|(p, g)| to_pair(p, g)).collect();

    for ((p, g), pair) in raw.iter().zip(&pairs) {
        let one = std::slice::from_ref(pair);
        check(metrics::mae(one).unwrap(), oracle_mae(p, g), 1e-15, "mae");
        assert_eq!(metrics::iou(one, 0.5).unwrap(), oracle_iou(p, g), "iou");
        check(metrics::s_measure(one).unwrap(), oracle_s(p, g), 1e-9, "s-measure");
        check(metrics::max_f_measure(one, &PrOptions::default()).unwrap(), oracle_maxf(std::slice::from_ref(&(p.clone(), g.clone()))), 1e-12, "maxf");
    }

    let curve = metrics::pr_curve(&pairs, &PrOptions::default()).unwrap();
    for (q, (p, r)) in curve.iter().zip(oracle_pr(&raw, false)) {
        check(q.precision, p, 1e-12, "precision");
        check(q.recall, r, 1e-12, "recall");
    }
    let micro = metrics::pr_curve(&pairs, &PrOptions { averaging: Averaging::Micro, ..PrOptions::default() }).unwrap();
    for (q, (p, r)) in micro.iter().zip(oracle_pr(&raw, true)) {
        check(q.precision, p, 1e-12, "micro precision");
        check(q.recall, r, 1e-12, "micro recall");
    }
    check(metrics::max_f_measure(&pairs, &PrOptions::default()).unwrap(), oracle_maxf(&raw), 1e-9, "maxf");
    let mae_all = raw.iter().map(|(p, g)| oracle_mae(p, g)).sum::<f64>() / 200.0;
    check(metrics::mae(&pairs).unwrap(), mae_all, 1e-9, "mae");
    let report = metrics::evaluate(&pairs, &PrOptions::default()).unwrap();
    for s in [report.max_f, report.mae, report.iou, report.s_measure] {
        assert!((0.0..=1.0).contains(&s));
    }
    assert!(start.elapsed().as_secs() < 30);
}

fn fixed_map(f: impl Fn(f64, f64) -> f64) -> Map {
    (0..N).map(|r| (0..N).map(|c| f(r as f64, c as f64)).collect()).collect()
}

pub fn s_measure_matches_frozen_reference_values() {
    let b = |x: bool| x as u8 as f64;
    let g1 = fixed_map(|r, c| b((3.0..11.0).contains(&r) && (4.0..10.0).contains(&c)));
    let p1 = fixed_map(|r, c| 0.5 * g1[r as usize][c as usize] + 0.5 * ((0.7 * r + 1.3 * c).sin() + 1.0) / 2.0);
    let g2 = fixed_map(|r, c| b((r - 9.0).powi(2) + (c - 6.0).powi(2) <= 25.0));
    let p2 = fixed_map(|r, c| ((r * 7.0 + c * 13.0) % 17.0) / 16.0);
    let g3 = fixed_map(|r, c| b(c < 3.0 || r >= 12.0));
    let p3 = fixed_map(|r, c| g3[r as usize][c as usize] * 0.8 + 0.1 * ((r + c) % 3.0) / 2.0);
    let expected = [0.7118323296503348, 0.29833198566653757, 0.6220051400338761];
    for ((p, g), e) in [(p1, g1), (p2, g2), (p3, g3)].iter().zip(expected) {
        let s = metrics::s_measure(&[to_pair(p, g)]).unwrap();
        check(s, e, 1e-12, "reference s-measure");
    }
}

pub fn identity_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let (_, g) = random_pair(&mut rng);
        if g.iter().flatten().all(|&v| v == 0.0) {
            continue;
        }
        let r = metrics::evaluate(&[to_pair(&g, &g)], &PrOptions::default()).unwrap();
        assert_eq!((r.max_f, r.mae, r.iou), (1.0, 0.0, 1.0));
        check(r.s_measure, 1.0, 1e-9, "perfect s-measure");
    }
    let zeros = fixed_map(|_, _| 0.0);
    let ones = fixed_map(|_, _| 1.0);
    let half = fixed_map(|_, _| 0.5);
    let score = |p: &Map, g: &Map| metrics::s_measure(&[to_pair(p, g)]).unwrap();
    assert_eq!(score(&zeros, &zeros), 1.0);
    assert_eq!(score(&ones, &zeros), 0.0);
    assert_eq!(score(&half, &zeros), 0.5);
    assert_eq!(score(&ones, &ones), 1.0);
    assert_eq!(score(&zeros, &ones), 0.0);
    assert_eq!(score(&half, &ones), 0.5);
    let one = |p: &Map, g: &Map| [to_pair(p, g)];
    assert_eq!(metrics::mae(&one(&ones, &zeros)).unwrap(), 1.0);
    assert_eq!(metrics::iou(&one(&zeros, &zeros), 0.5).unwrap(), 1.0);
    assert_eq!(metrics::iou(&one(&ones, &zeros), 0.5).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn maxf_ignores_bin_preserving_remaps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_pair(&mut rng);
        // Move every value to the low edge of its threshold bin.
        let snapped: Map = pred.iter().map(|row| row.iter().map(|&v| ((v * 256.0).floor().min(255.0)) / 256.0).collect()).collect();
        let a = metrics::max_f_measure(&[to_pair(&pred, &gt)], &PrOptions::default()).unwrap();
        let b = metrics::max_f_measure(&[to_pair(&snapped, &gt)], &PrOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mae_is_symmetric_under_complement(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_pair(&mut rng);
        let inv = |m: &Map| m.iter().map(|row| row.iter().map(|v| 1.0 - v).collect()).collect::<Map>();
        let a = metrics::mae(&[to_pair(&pred, &gt)]).unwrap();
        let b = metrics::mae(&[to_pair(&inv(&pred), &inv(&gt))]).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn iou_does_not_grow_with_disjoint_noise(seed in any::<u64>(), extra in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut pred, gt) = random_pair(&mut rng);
        let before = metrics::iou(&[to_pair(&pred, &gt)], 0.5).unwrap();
        for _ in 0..extra {
            let (r, c) = (rng.random_range(0..N), rng.random_range(0..N));
            if gt[r][c] == 0.0 {
                pred[r][c] = 1.0;
            }
        }
        let after = metrics::iou(&[to_pair(&pred, &gt)], 0.5).unwrap();
        prop_assert!(after <= before);
    }

    #[test]
    fn scores_stay_in_unit_interval(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_pair(&mut rng);
        let r = metrics::evaluate(&[to_pair(&pred, &gt)], &PrOptions::default()).unwrap();
        for s in [r.max_f, r.mae, r.iou, r.s_measure] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        prop_assert_eq!(r.pr_curve.len(), 255);
    }
}

register_tests!(
    two_hundred_random_pairs_match_oracles,
    s_measure_matches_frozen_reference_values,
    identity_cases,
);

//! Central finite-difference oracle shared by the gradient tests. It only
//! evaluates forward maps; it never calls a backward function.
#![allow(dead_code)]

use csod_core::{Param, Parameterized, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Σ w·y, used to reduce a tensor-valued map to a scalar.
pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut g = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * STEP);
    }
    g
}

/// Largest componentwise relative error, with components below the absolute
/// floor treated as matching.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let diff = (a - n).abs();
            if diff <= ABS_FLOOR {
                0.0
            } else {
                diff / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn assert_close(label: &str, analytic: &Tensor, numeric: &Tensor, tol: f64) {
    assert_eq!(analytic.shape(), numeric.shape(), "{label}: shape");
    let err = max_rel_err(analytic.data(), numeric.data());
    assert!(err <= tol, "{label}: max relative error {err:e} > {tol:e}");
}

/// Locations of every parameter element as (param index in visit order, element).
pub fn param_slots<M: Parameterized>(model: &M) -> Vec<(usize, usize)> {
    let mut slots = Vec::new();
    let mut k = 0;
    model.visit_params(&mut |p: &Param| {
        slots.extend((0..p.len()).map(|e| (k, e)));
        k += 1;
    });
    slots
}

fn with_slot<M: Parameterized>(model: &mut M, slot: (usize, usize), f: impl FnOnce(&mut f64)) {
    let mut k = 0;
    let mut f = Some(f);
    model.visit_params_mut(&mut |p: &mut Param| {
        if k == slot.0 {
            if let Some(f) = f.take() {
                f(&mut p.value.data_mut()[slot.1]);
            }
        }
        k += 1;
    });
}

pub fn analytic_at<M: Parameterized>(model: &M, slot: (usize, usize)) -> f64 {
    let mut k = 0;
    let mut out = 0.0;
    model.visit_params(&mut |p: &Param| {
        if k == slot.0 {
            out = p.grad.data()[slot.1];
        }
        k += 1;
    });
    out
}

/// Central differences of `loss` with respect to the given parameter slots.
pub fn numeric_param_grads<M: Parameterized>(
    model: &mut M,
    slots: &[(usize, usize)],
    mut loss: impl FnMut(&mut M) -> f64,
) -> Vec<f64> {
    slots
        .iter()
        .map(|&slot| {
            let mut orig = 0.0;
            with_slot(model, slot, |v| orig = *v);
            with_slot(model, slot, |v| *v = orig + STEP);
            let up = loss(model);
            with_slot(model, slot, |v| *v = orig - STEP);
            let down = loss(model);
            with_slot(model, slot, |v| *v = orig);
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// Overwrites every parameter (biases included) with uniform values in
/// `[-scale, scale]`, keeping pre-activations off the relu kink at zero.
pub fn randomize<M: Parameterized>(model: &mut M, scale: f64, r: &mut ChaCha8Rng) {
    model.visit_params_mut(&mut |p: &mut Param| {
        for v in p.value.data_mut() {
            *v = r.random_range(-scale..scale);
        }
    });
}

/// Registers plain check functions as tests of the including target.
macro_rules! register_tests {
    ($($check:ident),* $(,)?) => {
        #[cfg(test)]
        mod registered {
            $(
                #[test]
                fn $check() {
                    super::$check()
                }
            )*
        }
    };
}

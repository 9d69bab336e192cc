//! First-order optimizers, learning-rate schedule and gradient accumulation.
//!
//! Adam and AdaX differ in two places: AdaX grows its second moment by
//! `(1 + β2)` each step and normalizes by `(1 + β2)^t - 1`, and it applies no
//! bias correction to the first moment.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::error::{Error, Result};
use crate::tensor::{Param, ParamId, Parameterized, Tensor};

pub const DEFAULT_WEIGHT_DECAY: f64 = 0.0005;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SgdMomentum,
    Adam,
    Adax,
    Adagrad,
    RmsProp,
    Adadelta,
    AdamW,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::SgdMomentum,
        Algorithm::Adam,
        Algorithm::Adax,
        Algorithm::Adagrad,
        Algorithm::RmsProp,
        Algorithm::Adadelta,
        Algorithm::AdamW,
    ];

    /// The adaptive methods compared against each other by `optbench`.
    pub const COMPARED: [Algorithm; 6] = [
        Algorithm::Adadelta,
        Algorithm::Adam,
        Algorithm::Adagrad,
        Algorithm::RmsProp,
        Algorithm::AdamW,
        Algorithm::Adax,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SgdMomentum => "sgd_momentum",
            Algorithm::Adam => "adam",
            Algorithm::Adax => "adax",
            Algorithm::Adagrad => "adagrad",
            Algorithm::RmsProp => "rmsprop",
            Algorithm::Adadelta => "adadelta",
            Algorithm::AdamW => "adamw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// Where ε enters the denominator of the adaptive step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EpsPlacement {
    /// `√v̂ + ε`
    OutsideRoot,
    /// `√(v̂ + ε)`
    InsideRoot,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Learning rate α.
    pub alpha: f64,
    pub beta1: f64,
    /// Decay rate for Adam-family, accumulation rate for AdaX, ρ for Adadelta
    /// and the squared-gradient decay for RMSProp.
    pub beta2: f64,
    pub eps: f64,
    pub eps_placement: EpsPlacement,
    /// Added to the gradient (coupled) for every algorithm but AdamW, which
    /// shrinks the weights directly.
    pub weight_decay: f64,
    /// SGD only.
    pub momentum: f64,
}

impl OptimizerConfig {
    /// Conventional defaults for each algorithm. Adam, AdamW and AdaX carry a
    /// weight decay of 0.0005; the others none.
    pub fn new(algorithm: Algorithm) -> Self {
        let base = Self {
            algorithm,
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eps_placement: EpsPlacement::OutsideRoot,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            momentum: 0.9,
        };
        match algorithm {
            Algorithm::Adam | Algorithm::AdamW => base,
            Algorithm::Adax => Self { beta2: 1e-4, eps_placement: EpsPlacement::InsideRoot, ..base },
            Algorithm::SgdMomentum => Self { alpha: 1e-2, weight_decay: 0.0, ..base },
            Algorithm::Adagrad => Self { alpha: 1e-2, eps: 1e-10, weight_decay: 0.0, ..base },
            Algorithm::RmsProp => Self { alpha: 1e-2, beta2: 0.99, weight_decay: 0.0, ..base },
            Algorithm::Adadelta => Self { alpha: 1.0, beta2: 0.9, eps: 1e-6, weight_decay: 0.0, ..base },
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn without_decay(self) -> Self {
        Self { weight_decay: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad(format!("beta1 must be in [0, 1), got {}", self.beta1));
        }
        if self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return bad("weight_decay must be >= 0 and momentum in [0, 1)".into());
        }
        match self.algorithm {
            Algorithm::Adax if !(self.beta2 > 0.0) => {
                bad(format!("adax beta2 is an accumulation rate and must be > 0, got {}", self.beta2))
            }
            Algorithm::Adam | Algorithm::AdamW | Algorithm::RmsProp | Algorithm::Adadelta
                if !(0.0..1.0).contains(&self.beta2) =>
            {
                bad(format!("beta2 must be in [0, 1), got {}", self.beta2))
            }
            _ => Ok(()),
        }
    }

    fn denom(&self, v_hat: f64) -> f64 {
        match self.eps_placement {
            EpsPlacement::OutsideRoot => libm::sqrt(v_hat) + self.eps,
            EpsPlacement::InsideRoot => libm::sqrt(v_hat + self.eps),
        }
    }
}

/// Per-parameter optimizer memory. `m` is the first moment (momentum buffer
/// for SGD, accumulated squared updates for Adadelta), `v` the second.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
}

impl MomentState {
    pub fn for_param(p: &Param) -> Self {
        let s = p.value.shape();
        Self { m: Tensor::zeros(s), v: Tensor::zeros(s), t: 0 }
    }
}

/// One update of a single parameter; increments `state.t` first.
pub fn step_param(cfg: &OptimizerConfig, param: &mut Param, state: &mut MomentState) -> Result<()> {
    let shape = param.value.shape();
    if state.m.shape() != shape || state.v.shape() != shape || param.grad.shape() != shape {
        return Err(Error::UninitializedState(param.id));
    }
    state.t += 1;
    let t = state.t;
    let wd = cfg.weight_decay;
    let theta = param.value.data_mut();
    let grad = param.grad.data();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    let (b1, b2, a) = (cfg.beta1, cfg.beta2, cfg.alpha);

    match cfg.algorithm {
        Algorithm::Adam | Algorithm::AdamW => {
            let decoupled = cfg.algorithm == Algorithm::AdamW;
            let c1 = 1.0 - libm::pow(b1, t as f64);
            let c2 = 1.0 - libm::pow(b2, t as f64);
            for i in 0..theta.len() {
                let g = if decoupled { grad[i] } else { grad[i] + wd * theta[i] };
                if decoupled && wd != 0.0 {
                    theta[i] *= 1.0 - a * wd;
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= a * m_hat / cfg.denom(v_hat);
            }
        }
        Algorithm::Adax => {
            let norm = libm::expm1(t as f64 * libm::log1p(b2));
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = (1.0 + b2) * v[i] + b2 * g * g;
                let v_hat = v[i] / norm;
                theta[i] -= a * m[i] / cfg.denom(v_hat);
            }
        }
        Algorithm::SgdMomentum => {
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                m[i] = cfg.momentum * m[i] + g;
                theta[i] -= a * m[i];
            }
        }
        Algorithm::Adagrad => {
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                v[i] += g * g;
                theta[i] -= a * g / (libm::sqrt(v[i]) + cfg.eps);
            }
        }
        Algorithm::RmsProp => {
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                theta[i] -= a * g / (libm::sqrt(v[i]) + cfg.eps);
            }
        }
        Algorithm::Adadelta => {
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let delta = libm::sqrt(m[i] + cfg.eps) / libm::sqrt(v[i] + cfg.eps) * g;
                m[i] = b2 * m[i] + (1.0 - b2) * delta * delta;
                theta[i] -= a * delta;
            }
        }
    }
    if theta.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("optimizer step"))
    }
}

/// Adam (or AdamW) step over matched parameter/state slices.
pub fn adam_step(cfg: &OptimizerConfig, params: &mut [Param], states: &mut [MomentState]) -> Result<()> {
    step_all(cfg, &[Algorithm::Adam, Algorithm::AdamW], params, states)
}

pub fn adax_step(cfg: &OptimizerConfig, params: &mut [Param], states: &mut [MomentState]) -> Result<()> {
    step_all(cfg, &[Algorithm::Adax], params, states)
}

/// Step for any algorithm.
pub fn other_step(cfg: &OptimizerConfig, params: &mut [Param], states: &mut [MomentState]) -> Result<()> {
    step_all(cfg, &Algorithm::ALL, params, states)
}

fn step_all(cfg: &OptimizerConfig, allowed: &[Algorithm], params: &mut [Param], states: &mut [MomentState]) -> Result<()> {
    if !allowed.contains(&cfg.algorithm) {
        return Err(Error::InvalidConfig(format!("{} cannot run this step", cfg.algorithm.name())));
    }
    cfg.validate()?;
    if let Some(p) = params.get(states.len()) {
        return Err(Error::UninitializedState(p.id));
    }
    for (p, s) in params.iter_mut().zip(states.iter_mut()) {
        step_param(cfg, p, s)?;
    }
    Ok(())
}

/// Optimizer bound to the parameters of one model.
#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    states: BTreeMap<ParamId, MomentState>,
}

impl Optimizer {
    pub fn new<M: Parameterized + ?Sized>(cfg: OptimizerConfig, model: &M) -> Result<Self> {
        cfg.validate()?;
        let mut states = BTreeMap::new();
        model.visit_params(&mut |p| {
            states.insert(p.id, MomentState::for_param(p));
        });
        Ok(Self { cfg, states })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.cfg.alpha = alpha;
    }

    pub fn state(&self, id: ParamId) -> Option<&MomentState> {
        self.states.get(&id)
    }

    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let cfg = self.cfg;
        let mut result = Ok(());
        model.visit_params_mut(&mut |p| {
            if result.is_err() {
                return;
            }
            result = match self.states.get_mut(&p.id) {
                Some(s) => step_param(&cfg, p, s),
                None => Err(Error::UninitializedState(p.id)),
            };
        });
        result
    }
}

/// Step decay: `base` for the first half of training, `base / 10` after.
pub fn schedule_lr(base_alpha: f64, epoch: usize, total_epochs: usize) -> f64 {
    if 2 * epoch < total_epochs {
        base_alpha
    } else {
        base_alpha / 10.0
    }
}

/// Runs `run` (forward + backward, accumulating gradients) on each micro-batch,
/// averages the summed gradients over the batch count, takes one optimizer
/// step and clears the gradients. Returns the mean micro-batch loss.
pub fn accumulate_and_step<M, B>(
    optimizer: &mut Optimizer,
    model: &mut M,
    micro_batches: &[B],
    mut run: impl FnMut(&mut M, &B) -> Result<f64>,
) -> Result<f64>
where
    M: Parameterized + ?Sized,
{
    if micro_batches.is_empty() {
        return Err(Error::Empty("accumulate_and_step"));
    }
    model.zero_grad();
    let mut loss = 0.0;
    for b in micro_batches {
        loss += run(model, b)?;
    }
    let k = micro_batches.len() as f64;
    if micro_batches.len() > 1 {
        model.visit_params_mut(&mut |p| p.grad.scale_in_place(1.0 / k));
    }
    optimizer.step(model)?;
    model.zero_grad();
    Ok(loss / k)
}

//! Optimizer benchmark: loss traces of several optimizers on one task, all
//! starting from the same initial point.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::Init;
use crate::net::{total_loss, InitScheme, NetConfig, SodNet};
use crate::optim::{accumulate_and_step, step_param, Algorithm, MomentState, Optimizer, OptimizerConfig};
use crate::synth::{generate_indexed, SampleRecord};
use crate::tensor::{Param, ParamId, ParamKind, Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct MicroSodTask {
    pub net: NetConfig,
    pub samples: usize,
    pub accumulation: usize,
}

impl Default for MicroSodTask {
    fn default() -> Self {
        let net = NetConfig { stages: 3, stage_channels: vec![8, 16, 32], input_size: 64, ..NetConfig::default() };
        Self { net, samples: 20, accumulation: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    /// `½‖θ‖²` from a random start in `[-1, 1]^dim`.
    Quadratic { dim: usize },
    /// Rosenbrock's valley from `(-1.2, 1)`.
    Rosenbrock,
    /// The network on a small synthetic set; one iteration is one epoch and
    /// the loss is the mean training-set loss after it.
    MicroSod(MicroSodTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Quadratic { .. } => "quadratic",
            Task::Rosenbrock => "rosenbrock",
            Task::MicroSod(_) => "micro_sod",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "quadratic" => Some(Task::Quadratic { dim: 10 }),
            "rosenbrock" => Some(Task::Rosenbrock),
            "micro_sod" => Some(Task::MicroSod(MicroSodTask::default())),
            _ => None,
        }
    }
}

/// Loss before any step followed by the loss after each iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub losses: Vec<f64>,
}

impl Trace {
    pub fn initial(&self) -> f64 {
        self.losses[0]
    }

    pub fn last(&self) -> f64 {
        *self.losses.last().expect("trace holds the initial loss")
    }

    /// Fractional decrease of the final loss relative to the initial one.
    pub fn decrease(&self) -> f64 {
        1.0 - self.last() / self.initial()
    }
}

/// Per-algorithm step size that keeps each method in its stable regime on
/// the given task.
pub fn default_config(task: &Task, algorithm: Algorithm) -> OptimizerConfig {
    let cfg = OptimizerConfig::new(algorithm);
    let alpha = match (task, algorithm) {
        (_, Algorithm::Adadelta) => 1.0,
        (Task::Quadratic { .. }, Algorithm::Adagrad) => 3e-2,
        (Task::Quadratic { .. }, Algorithm::RmsProp | Algorithm::SgdMomentum) => 1e-3,
        (Task::Quadratic { .. }, _) => 3e-3,
        (Task::Rosenbrock, Algorithm::SgdMomentum) => 1e-4,
        (Task::Rosenbrock, _) => 1e-2,
        (Task::MicroSod(_), Algorithm::SgdMomentum) => 1e-1,
        (Task::MicroSod(_), Algorithm::Adagrad) => 1e-2,
        (Task::MicroSod(_), _) => 3e-3,
    };
    cfg.with_alpha(alpha)
}

pub fn optbench(task: &Task, configs: &[OptimizerConfig], iterations: usize, seed: u64) -> Result<Vec<Trace>> {
    for c in configs {
        c.validate()?;
    }
    match task {
        Task::Quadratic { dim } => {
            if *dim == 0 {
                return Err(Error::invalid("optbench", "quadratic dimension must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<f64> = (0..*dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            configs
                .iter()
                .map(|c| analytic_trace(c, &start, iterations, |t| (0.5 * t.iter().map(|v| v * v).sum::<f64>(), t.to_vec())))
                .collect()
        }
        Task::Rosenbrock => configs
            .iter()
            .map(|c| {
                analytic_trace(c, &[-1.2, 1.0], iterations, |t| {
                    let (x, y) = (t[0], t[1]);
                    let f = (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
                    (f, vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)])
                })
            })
            .collect(),
        Task::MicroSod(t) => {
            let data: Vec<SampleRecord> =
                (0..t.samples as u64).map(|i| generate_indexed(seed, i, t.net.input_size)).collect::<Result<_>>()?;
            configs.iter().map(|c| micro_sod_trace(t, &data, c, iterations, seed)).collect()
        }
    }
}

fn analytic_trace(
    cfg: &OptimizerConfig,
    start: &[f64],
    iterations: usize,
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> Result<Trace> {
    let shape = Shape::new(1, 1, 1, start.len());
    let mut p = Param::new(ParamId(0), ParamKind::Weight, Tensor::from_vec(shape, start.to_vec())?);
    let mut state = MomentState::for_param(&p);
    let mut losses = Vec::with_capacity(iterations + 1);
    let (mut loss, mut grad) = f(p.value.data());
    losses.push(loss);
    for _ in 0..iterations {
        p.grad.data_mut().copy_from_slice(&grad);
        step_param(cfg, &mut p, &mut state)?;
        (loss, grad) = f(p.value.data());
        losses.push(loss);
    }
    Ok(Trace { algorithm: cfg.algorithm, losses })
}

fn dataset_loss(net: &mut SodNet, data: &[SampleRecord]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        let out = net.forward(&s.image)?;
        total += total_loss(&out, &s.mask, Some(&s.edge).filter(|_| out.edge_map.is_some()))?;
    }
    Ok(total / data.len() as f64)
}

fn micro_sod_trace(
    task: &MicroSodTask,
    data: &[SampleRecord],
    cfg: &OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<Trace> {
    if data.is_empty() || task.accumulation == 0 {
        return Err(Error::invalid("optbench", "micro_sod needs samples and accumulation >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = InitScheme { encoder: Init::HeNormal, decoder: Init::default() };
    let mut net = SodNet::new(&task.net, init, &mut rng)?;
    let mut opt = Optimizer::new(*cfg, &net)?;
    let mut losses = vec![dataset_loss(&mut net, data)?];
    for _ in 0..epochs {
        for chunk in data.chunks(task.accumulation) {
            accumulate_and_step(&mut opt, &mut net, chunk, |n, s| {
                let edge = Some(&s.edge).filter(|_| task.net.edge_branch);
                n.train_step(&s.image, &s.mask, edge)
            })?;
        }
        losses.push(dataset_loss(&mut net, data)?);
    }
    Ok(Trace { algorithm: cfg.algorithm, losses })
}

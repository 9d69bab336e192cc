//! Stateful layers: each owns its parameters and retains what its backward
//! pass needs from the most recent forward.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ops::{self, Activation};
use crate::tensor::{Param, ParamIds, ParamKind, Parameterized, Shape, Tensor};

/// Weight initialization scheme. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with the given standard deviation, resampled beyond two deviations.
    TruncatedNormal { std: f64 },
    /// Plain normal scaled by `sqrt(2 / fan_in)`.
    HeNormal,
}

impl Default for Init {
    fn default() -> Self {
        Init::TruncatedNormal { std: 0.01 }
    }
}

impl Init {
    pub fn sample<R: Rng + ?Sized>(&self, fan_in: usize, rng: &mut R) -> f64 {
        match *self {
            Init::TruncatedNormal { std } => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= 2.0 {
                    break z * std;
                }
            },
            Init::HeNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z * libm::sqrt(2.0 / fan_in.max(1) as f64)
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, t: &mut Tensor, fan_in: usize, rng: &mut R) {
        for v in t.data_mut() {
            *v = self.sample(fan_in, rng);
        }
    }
}

/// Everything a layer constructor needs: id source, initializer and RNG.
pub struct Builder<'a, R: Rng + ?Sized> {
    pub ids: &'a mut ParamIds,
    pub init: Init,
    pub rng: &'a mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn weight(&mut self, shape: Shape) -> Param {
        let mut p = Param::zeros(self.ids.next_id(), ParamKind::Weight, shape);
        self.init.fill(&mut p.value, shape.item(), self.rng);
        p
    }

    fn bias(&mut self, n: usize) -> Param {
        Param::zeros(self.ids.next_id(), ParamKind::Bias, Shape::new(1, n, 1, 1))
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(b: &mut Builder<'_, R>, c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        let weight = b.weight(Shape::new(c_out, c_in, kernel, kernel));
        let bias = b.bias(c_out);
        Self { weight, bias, stride, padding, input: None }
    }

    /// Same-size convolution: stride 1, padding `kernel / 2`.
    pub fn same<R: Rng + ?Sized>(b: &mut Builder<'_, R>, c_in: usize, c_out: usize, kernel: usize) -> Self {
        Self::new(b, c_in, c_out, kernel, 1, kernel / 2)
    }

    pub fn c_in(&self) -> usize {
        self.weight.value.shape().c
    }

    pub fn c_out(&self) -> usize {
        self.weight.value.shape().n
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Forward without retaining activations.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        ops::conv2d(x, &self.weight.value, &self.bias.value, self.stride, self.padding)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or(Error::BackwardBeforeForward("conv2d"))?;
        let g = ops::conv2d_backward(&x, &self.weight.value, self.stride, self.padding, upstream)?;
        self.weight.grad.add_assign(&g.weight)?;
        self.bias.grad.add_assign(&g.bias)?;
        Ok(g.input)
    }
}

impl Parameterized for Conv2d {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(b: &mut Builder<'_, R>, features_in: usize, features_out: usize) -> Self {
        let weight = b.weight(Shape::new(features_out, features_in, 1, 1));
        let bias = b.bias(features_out);
        Self { weight, bias, input: None }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        ops::linear(x, &self.weight.value, &self.bias.value)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or(Error::BackwardBeforeForward("linear"))?;
        let g = ops::linear_backward(&x, &self.weight.value, upstream)?;
        self.weight.grad.add_assign(&g.weight)?;
        self.bias.grad.add_assign(&g.bias)?;
        Ok(g.input)
    }
}

impl Parameterized for Linear {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[derive(Clone, Debug)]
pub struct Act {
    kind: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Act {
    pub fn new(kind: Activation) -> Self {
        Self { kind, cache: None }
    }

    pub fn relu() -> Self {
        Self::new(Activation::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::new(Activation::Sigmoid)
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let y = ops::activation(self.kind, x);
        // relu only needs its input, sigmoid only its output
        let keep = match self.kind {
            Activation::Relu => (x.clone(), Tensor::default()),
            Activation::Sigmoid => (Tensor::default(), y.clone()),
        };
        self.cache = Some(keep);
        y
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let (x, y) = self.cache.take().ok_or(Error::BackwardBeforeForward("activation"))?;
        match self.kind {
            Activation::Relu => ops::activation_backward(self.kind, &x, &y, upstream),
            Activation::Sigmoid => ops::activation_backward(self.kind, &y, &y, upstream),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MaxPool2 {
    cache: Option<(Shape, Vec<usize>)>,
}

impl MaxPool2 {
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, arg) = ops::maxpool2x2(x)?;
        self.cache = Some((x.shape(), arg));
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let (shape, arg) = self.cache.take().ok_or(Error::BackwardBeforeForward("maxpool2x2"))?;
        ops::maxpool2x2_backward(shape, &arg, upstream)
    }
}

/// Convolution followed by relu.
#[derive(Clone, Debug)]
pub struct ConvRelu {
    pub conv: Conv2d,
    act: Act,
}

impl ConvRelu {
    pub fn same<R: Rng + ?Sized>(b: &mut Builder<'_, R>, c_in: usize, c_out: usize, kernel: usize) -> Self {
        Self { conv: Conv2d::same(b, c_in, c_out, kernel), act: Act::relu() }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.conv.forward(x)?;
        Ok(self.act.forward(&y))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::activation(Activation::Relu, &self.conv.infer(x)?))
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let g = self.act.backward(upstream)?;
        self.conv.backward(&g)
    }
}

impl Parameterized for ConvRelu {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.conv.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv.visit_params_mut(f);
    }
}

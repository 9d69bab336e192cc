//! Decoder building blocks: the fire module, squeeze-and-excitation channel
//! attention, the fused decoder block built from them, the plain 3×3 block it
//! replaces, and exact parameter accounting for all of them.

use alloc::format;

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{Act, Builder, Conv2d, ConvRelu, Linear};
use crate::ops;
use crate::tensor::{Param, ParamKind, Parameterized, Tensor};

/// Squeeze 1×1 followed by parallel 1×1 / 3×3 expand paths.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct FireConfig {
    pub c_in: usize,
    pub squeeze: usize,
    pub expand1: usize,
    pub expand3: usize,
}

impl FireConfig {
    pub fn new(c_in: usize, squeeze: usize, expand1: usize, expand3: usize) -> Result<Self> {
        let cfg = Self { c_in, squeeze, expand1, expand3 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fire module mapping `c_in` to `c_out` channels with the squeeze width set
    /// to `c_out / squeeze_divisor` (at least 1).
    pub fn for_channels(c_in: usize, c_out: usize, squeeze_divisor: usize) -> Result<Self> {
        if c_out < 2 || c_out % 2 != 0 {
            return Err(Error::InvalidConfig(format!("fire output channels must be even and >= 2, got {c_out}")));
        }
        if squeeze_divisor == 0 {
            return Err(Error::InvalidConfig("squeeze divisor must be >= 1".into()));
        }
        Self::new(c_in, (c_out / squeeze_divisor).max(1), c_out / 2, c_out / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeeze == 0 || self.squeeze > self.c_in {
            return Err(Error::InvalidConfig(format!(
                "fire squeeze width {} must be in 1..={}",
                self.squeeze, self.c_in
            )));
        }
        if self.expand1 == 0 || self.expand1 != self.expand3 {
            return Err(Error::InvalidConfig(format!(
                "fire expand paths must be equal and non-zero, got {} and {}",
                self.expand1, self.expand3
            )));
        }
        Ok(())
    }

    pub fn c_out(&self) -> usize {
        self.expand1 + self.expand3
    }
}

/// How the channel gate is applied to the block input.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum SeFusion {
    /// `x·s + x`
    #[default]
    ScaleAndAdd,
    /// `x·s`
    Scale,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SeConfig {
    pub channels: usize,
    pub reduction: usize,
    pub fusion: SeFusion,
}

impl SeConfig {
    pub fn new(channels: usize, reduction: usize) -> Result<Self> {
        let cfg = Self { channels, reduction, fusion: SeFusion::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reduction == 0 || self.channels == 0 {
            return Err(Error::InvalidConfig("SE channels and reduction must be >= 1".into()));
        }
        Ok(())
    }

    /// Bottleneck width `channels / reduction`, floored at 1.
    pub fn hidden(&self) -> usize {
        (self.channels / self.reduction).max(1)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct BlockParamCount {
    pub weights: usize,
    pub biases: usize,
    pub total: usize,
}

impl BlockParamCount {
    pub const ZERO: Self = Self { weights: 0, biases: 0, total: 0 };

    pub const fn new(weights: usize, biases: usize) -> Self {
        Self { weights, biases, total: weights + biases }
    }
}

impl core::ops::Add for BlockParamCount {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.weights + rhs.weights, self.biases + rhs.biases)
    }
}

impl core::iter::Sum for BlockParamCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

/// Closed-form parameter counts.
pub mod closed_form {
    use super::{BlockParamCount, FireConfig, SeConfig};

    pub fn conv(c_in: usize, c_out: usize, kernel: usize) -> BlockParamCount {
        BlockParamCount::new(kernel * kernel * c_in * c_out, c_out)
    }

    pub fn fire(cfg: &FireConfig) -> BlockParamCount {
        conv(cfg.c_in, cfg.squeeze, 1) + conv(cfg.squeeze, cfg.expand1, 1) + conv(cfg.squeeze, cfg.expand3, 3)
    }

    pub fn se(cfg: &SeConfig) -> BlockParamCount {
        let (c, h) = (cfg.channels, cfg.hidden());
        BlockParamCount::new(c * h, h) + BlockParamCount::new(h * c, c)
    }

    pub fn plain(c_in: usize, c_out: usize) -> BlockParamCount {
        conv(c_in, c_out, 3)
    }
}

/// Runtime count of every registered weight and bias element.
pub fn count_params<P: Parameterized + ?Sized>(block: &P) -> BlockParamCount {
    let (mut w, mut b) = (0, 0);
    block.visit_params(&mut |p: &Param| match p.kind {
        ParamKind::Weight => w += p.len(),
        ParamKind::Bias => b += p.len(),
    });
    BlockParamCount::new(w, b)
}

#[derive(Clone, Debug)]
pub struct Fire {
    cfg: FireConfig,
    pub squeeze: Conv2d,
    squeeze_act: Act,
    pub expand1: Conv2d,
    pub expand3: Conv2d,
    out_act: Act,
}

impl Fire {
    pub fn new<R: Rng + ?Sized>(b: &mut Builder<'_, R>, cfg: FireConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            squeeze: Conv2d::same(b, cfg.c_in, cfg.squeeze, 1),
            squeeze_act: Act::relu(),
            expand1: Conv2d::same(b, cfg.squeeze, cfg.expand1, 1),
            expand3: Conv2d::same(b, cfg.squeeze, cfg.expand3, 3),
            out_act: Act::relu(),
        })
    }

    pub fn config(&self) -> FireConfig {
        self.cfg
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        check_channels("fire", self.cfg.c_in, x)?;
        let s = self.squeeze.forward(x)?;
        let s = self.squeeze_act.forward(&s);
        let a = self.expand1.forward(&s)?;
        let b = self.expand3.forward(&s)?;
        Ok(self.out_act.forward(&ops::concat_channels(&a, &b)?))
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let g = self.out_act.backward(upstream)?;
        let (ga, gb) = ops::concat_channels_backward(&g, self.cfg.expand1)?;
        let mut gs = self.expand1.backward(&ga)?;
        gs.add_assign(&self.expand3.backward(&gb)?)?;
        let gs = self.squeeze_act.backward(&gs)?;
        self.squeeze.backward(&gs)
    }
}

impl Parameterized for Fire {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.squeeze.visit_params(f);
        self.expand1.visit_params(f);
        self.expand3.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.squeeze.visit_params_mut(f);
        self.expand1.visit_params_mut(f);
        self.expand3.visit_params_mut(f);
    }
}

/// Squeeze-and-excitation: pooled channel statistics drive a sigmoid gate
/// that rescales each channel.
#[derive(Clone, Debug)]
pub struct Se {
    cfg: SeConfig,
    pub reduce: Linear,
    reduce_act: Act,
    pub expand: Linear,
    gate: Act,
    cache: Option<(Tensor, Tensor)>,
}

impl Se {
    pub fn new<R: Rng + ?Sized>(b: &mut Builder<'_, R>, cfg: SeConfig) -> Result<Self> {
        cfg.validate()?;
        let hidden = cfg.hidden();
        Ok(Self {
            cfg,
            reduce: Linear::new(b, cfg.channels, hidden),
            reduce_act: Act::relu(),
            expand: Linear::new(b, hidden, cfg.channels),
            gate: Act::sigmoid(),
            cache: None,
        })
    }

    pub fn config(&self) -> SeConfig {
        self.cfg
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        check_channels("se", self.cfg.channels, x)?;
        let pooled = ops::global_avg_pool(x);
        let z = self.reduce.forward(&pooled)?;
        let z = self.reduce_act.forward(&z);
        let s = self.expand.forward(&z)?;
        let s = self.gate.forward(&s);
        let mut y = ops::channel_scale(x, &s)?;
        if self.cfg.fusion == SeFusion::ScaleAndAdd {
            y.add_assign(x)?;
        }
        self.cache = Some((x.clone(), s));
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let (x, s) = self.cache.take().ok_or(Error::BackwardBeforeForward("se"))?;
        let (mut dx, ds) = ops::channel_scale_backward(&x, &s, upstream)?;
        if self.cfg.fusion == SeFusion::ScaleAndAdd {
            dx.add_assign(upstream)?;
        }
        let g = self.gate.backward(&ds)?;
        let g = self.expand.backward(&g)?;
        let g = self.reduce_act.backward(&g)?;
        let g = self.reduce.backward(&g)?;
        dx.add_assign(&ops::global_avg_pool_backward(x.shape(), &g)?)?;
        Ok(dx)
    }
}

impl Parameterized for Se {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.reduce.visit_params(f);
        self.expand.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.reduce.visit_params_mut(f);
        self.expand.visit_params_mut(f);
    }
}

/// Uncompressed baseline: relu(conv3×3).
#[derive(Clone, Debug)]
pub struct PlainBlock {
    c_in: usize,
    pub conv: ConvRelu,
}

impl PlainBlock {
    pub fn new<R: Rng + ?Sized>(b: &mut Builder<'_, R>, c_in: usize, c_out: usize) -> Self {
        Self { c_in, conv: ConvRelu::same(b, c_in, c_out, 3) }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        check_channels("plain", self.c_in, x)?;
        self.conv.forward(x)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        self.conv.backward(upstream)
    }
}

impl Parameterized for PlainBlock {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.conv.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv.visit_params_mut(f);
    }
}

#[derive(Clone, Debug)]
pub enum DecoderBody {
    /// Fire module, optionally followed by channel attention.
    Compressed { fire: Fire, se: Option<Se> },
    Plain(PlainBlock),
}

impl DecoderBody {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        match self {
            DecoderBody::Compressed { fire, se } => {
                let y = fire.forward(x)?;
                match se {
                    Some(se) => se.forward(&y),
                    None => Ok(y),
                }
            }
            DecoderBody::Plain(p) => p.forward(x),
        }
    }

    fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        match self {
            DecoderBody::Compressed { fire, se } => {
                let g = match se {
                    Some(se) => se.backward(upstream)?,
                    None => upstream.clone(),
                };
                fire.backward(&g)
            }
            DecoderBody::Plain(p) => p.backward(upstream),
        }
    }
}

impl Parameterized for DecoderBody {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        match self {
            DecoderBody::Compressed { fire, se } => {
                fire.visit_params(f);
                se.visit_params(f);
            }
            DecoderBody::Plain(p) => p.visit_params(f),
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        match self {
            DecoderBody::Compressed { fire, se } => {
                fire.visit_params_mut(f);
                se.visit_params_mut(f);
            }
            DecoderBody::Plain(p) => p.visit_params_mut(f),
        }
    }
}

/// One decoder level. The coarser feature (when present) is channel-matched by
/// a 1×1 convolution, upsampled ×2 and added to the skip feature; the sum runs
/// through the body. With a compressed body this is the fire + attention block.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    skip_channels: usize,
    pub lateral: Option<Conv2d>,
    pub body: DecoderBody,
}

impl DecoderBlock {
    /// Fire (+ optional SE) body. `below_channels` is the channel count of the
    /// coarser input, or `None` for the coarsest level.
    pub fn isfcrem<R: Rng + ?Sized>(
        b: &mut Builder<'_, R>,
        fire: FireConfig,
        se: Option<SeConfig>,
        below_channels: Option<usize>,
    ) -> Result<Self> {
        if let Some(se) = se {
            if se.channels != fire.c_out() {
                return Err(Error::InvalidConfig(format!(
                    "SE channels {} differ from fire output {}",
                    se.channels,
                    fire.c_out()
                )));
            }
        }
        let lateral = below_channels.map(|c| Conv2d::same(b, c, fire.c_in, 1));
        let fire_block = Fire::new(b, fire)?;
        let se = se.map(|cfg| Se::new(b, cfg)).transpose()?;
        Ok(Self { skip_channels: fire.c_in, lateral, body: DecoderBody::Compressed { fire: fire_block, se } })
    }

    pub fn plain<R: Rng + ?Sized>(b: &mut Builder<'_, R>, c_in: usize, c_out: usize, below_channels: Option<usize>) -> Self {
        let lateral = below_channels.map(|c| Conv2d::same(b, c, c_in, 1));
        let body = DecoderBody::Plain(PlainBlock::new(b, c_in, c_out));
        Self { skip_channels: c_in, lateral, body }
    }

    pub fn forward(&mut self, skip: &Tensor, below: Option<&Tensor>) -> Result<Tensor> {
        check_channels("decoder block", self.skip_channels, skip)?;
        let fused = match (below, self.lateral.as_mut()) {
            (Some(below), Some(lateral)) => {
                // 1×1 conv commutes with nearest upsampling; convolve at the coarse size
                let matched = ops::upsample_nearest2x(&lateral.forward(below)?);
                let (a, b) = (skip.shape(), matched.shape());
                if (a.n, a.h, a.w) != (b.n, b.h, b.w) {
                    return Err(Error::ShapeMismatch { op: "decoder block fusion", left: a, right: b });
                }
                ops::add(skip, &matched)?
            }
            (None, None) => skip.clone(),
            (Some(_), None) => return Err(Error::invalid("decoder block", "coarsest level takes no lower input")),
            (None, Some(_)) => return Err(Error::invalid("decoder block", "missing lower input")),
        };
        self.body.forward(&fused)
    }

    /// Returns gradients for (skip, below).
    pub fn backward(&mut self, upstream: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        let g = self.body.backward(upstream)?;
        let below = match self.lateral.as_mut() {
            Some(lateral) => Some(lateral.backward(&ops::upsample_nearest2x_backward(&g)?)?),
            None => None,
        };
        Ok((g, below))
    }

    pub fn closed_form_count(&self) -> BlockParamCount {
        let lateral = self
            .lateral
            .as_ref()
            .map_or(BlockParamCount::ZERO, |l| closed_form::conv(l.c_in(), l.c_out(), 1));
        let body = match &self.body {
            DecoderBody::Compressed { fire, se } => {
                closed_form::fire(&fire.config()) + se.as_ref().map_or(BlockParamCount::ZERO, |s| closed_form::se(&s.config()))
            }
            DecoderBody::Plain(p) => closed_form::plain(p.c_in, p.conv.conv.c_out()),
        };
        lateral + body
    }
}

impl Parameterized for DecoderBlock {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.lateral.visit_params(f);
        self.body.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.lateral.visit_params_mut(f);
        self.body.visit_params_mut(f);
    }
}

fn check_channels(block: &'static str, expected: usize, x: &Tensor) -> Result<()> {
    let got = x.shape().c;
    if got == expected {
        Ok(())
    } else {
        Err(Error::ChannelMismatch { block, expected, got })
    }
}

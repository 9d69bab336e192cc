//! Miniature U-shaped saliency network.
//!
//! Encoder: per stage two 3×3 conv+relu layers, then 2×2 max-pooling (none
//! after the last stage). Decoder: one block per stage except the first,
//! coarse to fine, each fusing the skip feature with the upsampled coarser
//! decoder output. Every decoder level has a 1×1 prediction head whose logits
//! are nearest-upsampled to input resolution; a 1×1 fusion over all side
//! logits gives the final map. An optional edge branch taps encoder stage 2,
//! predicts an edge map and feeds its feature into every decoder level.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;

use crate::blocks::{closed_form, count_params, BlockParamCount, DecoderBlock, FireConfig, SeConfig, SeFusion};
use crate::error::{Error, Result};
use crate::layers::{Act, Builder, Conv2d, ConvRelu, Init, MaxPool2};
use crate::ops;
use crate::tensor::{Param, ParamIds, Parameterized, Shape, Tensor};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum DecoderKind {
    #[default]
    Fire,
    Plain,
}

impl DecoderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecoderKind::Fire => "fire",
            DecoderKind::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fire" => Some(DecoderKind::Fire),
            "plain" => Some(DecoderKind::Plain),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NetConfig {
    pub stages: usize,
    pub stage_channels: Vec<usize>,
    pub decoder: DecoderKind,
    pub se_enabled: bool,
    pub edge_branch: bool,
    pub input_size: usize,
    /// Fire squeeze width is `c_out / squeeze_divisor`.
    pub squeeze_divisor: usize,
    pub se_reduction: usize,
    pub se_fusion: SeFusion,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            stages: 4,
            stage_channels: vec![16, 32, 64, 128],
            decoder: DecoderKind::Fire,
            se_enabled: true,
            edge_branch: false,
            input_size: 64,
            squeeze_divisor: 4,
            se_reduction: 4,
            se_fusion: SeFusion::ScaleAndAdd,
        }
    }
}

/// Keys accepted by [`NetConfig::set`], in serialization order.
pub const NET_CONFIG_KEYS: [&str; 9] = [
    "stages",
    "stage_channels",
    "decoder",
    "se_enabled",
    "edge_branch",
    "input_size",
    "squeeze_divisor",
    "se_reduction",
    "se_fusion",
];

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{key}: expected a non-negative integer, got {v:?}")))
}

impl NetConfig {
    /// Smallest sensible configuration for tests: two stages of 4 and 8 channels.
    pub fn tiny(input_size: usize) -> Self {
        Self { stages: 2, stage_channels: vec![4, 8], input_size, se_reduction: 2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages < 2 {
            return Err(Error::InvalidConfig(format!("stages must be >= 2, got {}", self.stages)));
        }
        if self.stage_channels.len() != self.stages {
            return Err(Error::InvalidConfig(format!(
                "stage_channels has {} entries but stages = {}",
                self.stage_channels.len(),
                self.stages
            )));
        }
        if self.stage_channels[0] == 0 || self.stage_channels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("stage_channels must be positive and strictly increasing".into()));
        }
        let scale = 1usize << (self.stages - 1);
        if self.input_size == 0 || self.input_size % scale != 0 {
            return Err(Error::InvalidConfig(format!(
                "input_size {} must be a positive multiple of 2^(stages-1) = {scale}",
                self.input_size
            )));
        }
        if self.decoder == DecoderKind::Fire {
            for &c in &self.stage_channels[1..] {
                FireConfig::for_channels(c, c, self.squeeze_divisor)?;
            }
        }
        if self.se_reduction == 0 {
            return Err(Error::InvalidConfig("se_reduction must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of decoder levels (and side maps).
    pub fn levels(&self) -> usize {
        self.stages - 1
    }

    /// Same network with the plain-convolution decoder.
    pub fn plain_twin(&self) -> Self {
        Self { decoder: DecoderKind::Plain, ..self.clone() }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "stages" => self.stages = parse_usize(key, v)?,
            "stage_channels" => {
                self.stage_channels = v.split(',').map(|c| parse_usize(key, c)).collect::<Result<_>>()?;
            }
            "decoder" => {
                self.decoder = DecoderKind::parse(v)
                    .ok_or_else(|| Error::InvalidConfig(format!("decoder: expected fire or plain, got {v:?}")))?
            }
            "se_enabled" => self.se_enabled = parse_bool(key, v)?,
            "edge_branch" => self.edge_branch = parse_bool(key, v)?,
            "input_size" => self.input_size = parse_usize(key, v)?,
            "squeeze_divisor" => self.squeeze_divisor = parse_usize(key, v)?,
            "se_reduction" => self.se_reduction = parse_usize(key, v)?,
            "se_fusion" => {
                self.se_fusion = match v {
                    "scale_add" => SeFusion::ScaleAndAdd,
                    "scale" => SeFusion::Scale,
                    _ => return Err(Error::InvalidConfig(format!("se_fusion: expected scale_add or scale, got {v:?}"))),
                }
            }
            _ => return Err(Error::InvalidConfig(format!("unknown net key {key:?}"))),
        }
        Ok(())
    }

    /// `key=value` lines, one per field.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let channels: Vec<String> = self.stage_channels.iter().map(|c| c.to_string()).collect();
        let fusion = match self.se_fusion {
            SeFusion::ScaleAndAdd => "scale_add",
            SeFusion::Scale => "scale",
        };
        let _ = writeln!(out, "stages={}", self.stages);
        let _ = writeln!(out, "stage_channels={}", channels.join(","));
        let _ = writeln!(out, "decoder={}", self.decoder.as_str());
        let _ = writeln!(out, "se_enabled={}", self.se_enabled);
        let _ = writeln!(out, "edge_branch={}", self.edge_branch);
        let _ = writeln!(out, "input_size={}", self.input_size);
        let _ = writeln!(out, "squeeze_divisor={}", self.squeeze_divisor);
        let _ = writeln!(out, "se_reduction={}", self.se_reduction);
        let _ = writeln!(out, "se_fusion={fusion}");
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {line:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn fire_config(&self, c: usize) -> Result<FireConfig> {
        FireConfig::for_channels(c, c, self.squeeze_divisor)
    }

    fn se_config(&self, c: usize) -> Result<Option<SeConfig>> {
        if !self.se_enabled {
            return Ok(None);
        }
        let mut se = SeConfig::new(c, self.se_reduction)?;
        se.fusion = self.se_fusion;
        Ok(Some(se))
    }
}

/// Initialization used when building a network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitScheme {
    pub encoder: Init,
    /// Decoder, heads and edge branch.
    pub decoder: Init,
}

impl Default for InitScheme {
    fn default() -> Self {
        Self { encoder: Init::default(), decoder: Init::default() }
    }
}

impl InitScheme {
    pub fn uniform(init: Init) -> Self {
        Self { encoder: init, decoder: init }
    }
}

/// Network predictions, every map at input resolution with values in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutputs {
    /// One map per decoder level, finest level first.
    pub side_maps: Vec<Tensor>,
    pub final_map: Tensor,
    pub edge_map: Option<Tensor>,
}

impl ForwardOutputs {
    pub fn map_count(&self) -> usize {
        self.side_maps.len() + 1 + usize::from(self.edge_map.is_some())
    }
}

/// dL/d(map) for every output map.
#[derive(Clone, Debug)]
pub struct MapGrads {
    pub side: Vec<Tensor>,
    pub final_map: Tensor,
    pub edge: Option<Tensor>,
}

#[derive(Clone, Debug)]
struct EncoderStage {
    conv1: ConvRelu,
    conv2: ConvRelu,
    pool: Option<MaxPool2>,
}

impl Parameterized for EncoderStage {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.conv1.visit_params(f);
        self.conv2.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv1.visit_params_mut(f);
        self.conv2.visit_params_mut(f);
    }
}

#[derive(Clone, Debug)]
struct EdgeBranch {
    conv: ConvRelu,
    head: Conv2d,
    gate: Act,
    /// Per decoder level (finest first): 1×1 channel match to the level width.
    matchers: Vec<Conv2d>,
    /// Per decoder level: poolings from the edge tap down to the level size.
    pools: Vec<Vec<MaxPool2>>,
}

impl Parameterized for EdgeBranch {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.conv.visit_params(f);
        self.head.visit_params(f);
        self.matchers.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv.visit_params_mut(f);
        self.head.visit_params_mut(f);
        self.matchers.visit_params_mut(f);
    }
}

/// Parameter totals split by network part.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ParamBreakdown {
    pub encoder: BlockParamCount,
    /// Decoder blocks, side heads and the final fusion.
    pub decoder: BlockParamCount,
    pub edge: BlockParamCount,
    /// Per decoder level (finest first): block plus head.
    pub levels: [BlockParamCount; 8],
}

impl ParamBreakdown {
    pub fn total(&self) -> BlockParamCount {
        self.encoder + self.decoder + self.edge
    }
}

#[derive(Clone, Debug)]
pub struct SodNet {
    cfg: NetConfig,
    encoder: Vec<EncoderStage>,
    edge: Option<EdgeBranch>,
    /// Finest level (encoder stage 2) first.
    decoder: Vec<DecoderBlock>,
    heads: Vec<Conv2d>,
    fuse: Conv2d,
    side_gates: Vec<Act>,
    final_gate: Act,
}

impl SodNet {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, init: InitScheme, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if cfg.stages > 9 {
            return Err(Error::InvalidConfig("at most 9 stages are supported".into()));
        }
        let mut ids = ParamIds::new();
        let ch = &cfg.stage_channels;
        let levels = cfg.levels();

        let mut b = Builder { ids: &mut ids, init: init.encoder, rng: &mut *rng };
        let mut encoder = Vec::with_capacity(cfg.stages);
        let mut c_prev = 3;
        for (s, &c) in ch.iter().enumerate() {
            encoder.push(EncoderStage {
                conv1: ConvRelu::same(&mut b, c_prev, c, 3),
                conv2: ConvRelu::same(&mut b, c, c, 3),
                pool: (s + 1 < cfg.stages).then(MaxPool2::default),
            });
            c_prev = c;
        }

        b.init = init.decoder;
        let edge = cfg.edge_branch.then(|| EdgeBranch {
            conv: ConvRelu::same(&mut b, ch[1], ch[1], 3),
            head: Conv2d::same(&mut b, ch[1], 1, 1),
            gate: Act::sigmoid(),
            matchers: (1..cfg.stages).map(|s| Conv2d::same(&mut b, ch[1], ch[s], 1)).collect(),
            pools: (1..cfg.stages).map(|s| (1..s).map(|_| MaxPool2::default()).collect()).collect(),
        });

        let mut decoder = Vec::with_capacity(levels);
        for s in 1..cfg.stages {
            let c = ch[s];
            let below = (s + 1 < cfg.stages).then(|| ch[s + 1]);
            let block = match cfg.decoder {
                DecoderKind::Fire => DecoderBlock::isfcrem(&mut b, cfg.fire_config(c)?, cfg.se_config(c)?, below)?,
                DecoderKind::Plain => DecoderBlock::plain(&mut b, c, c, below),
            };
            decoder.push(block);
        }
        let heads = (1..cfg.stages).map(|s| Conv2d::same(&mut b, ch[s], 1, 1)).collect();
        let fuse = Conv2d::same(&mut b, levels, 1, 1);

        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            edge,
            decoder,
            heads,
            fuse,
            side_gates: (0..levels).map(|_| Act::sigmoid()).collect(),
            final_gate: Act::sigmoid(),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn forward(&mut self, images: &Tensor) -> Result<ForwardOutputs> {
        let s = images.shape();
        let size = self.cfg.input_size;
        if s.c != 3 || s.h != size || s.w != size || s.n == 0 {
            return Err(Error::ShapeMismatch {
                op: "network input",
                left: Shape::new(s.n.max(1), 3, size, size),
                right: s,
            });
        }

        let mut feats = Vec::with_capacity(self.cfg.stages);
        let mut x = images.clone();
        for stage in &mut self.encoder {
            let y = stage.conv1.forward(&x)?;
            let y = stage.conv2.forward(&y)?;
            if let Some(pool) = stage.pool.as_mut() {
                x = pool.forward(&y)?;
            }
            feats.push(y);
        }

        let mut edge_map = None;
        let mut edge_skips: Vec<Option<Tensor>> = vec![None; self.cfg.levels()];
        if let Some(edge) = self.edge.as_mut() {
            let ef = edge.conv.forward(&feats[1])?;
            let logit = ops::upsample_nearest2x(&edge.head.forward(&ef)?);
            edge_map = Some(edge.gate.forward(&logit));
            for (level, (matcher, pools)) in edge.matchers.iter_mut().zip(&mut edge.pools).enumerate() {
                let mut t = matcher.forward(&ef)?;
                for pool in pools.iter_mut() {
                    t = pool.forward(&t)?;
                }
                edge_skips[level] = Some(t);
            }
        }

        let levels = self.cfg.levels();
        let mut outs: Vec<Option<Tensor>> = vec![None; levels];
        for level in (0..levels).rev() {
            let stage = level + 1;
            let skip = match &edge_skips[level] {
                Some(e) => ops::add(&feats[stage], e)?,
                None => feats[stage].clone(),
            };
            let below = outs.get(level + 1).and_then(|o| o.as_ref());
            outs[level] = Some(self.decoder[level].forward(&skip, below)?);
        }

        let mut logits = Vec::with_capacity(levels);
        let mut side_maps = Vec::with_capacity(levels);
        for level in 0..levels {
            let d = outs[level].as_ref().expect("decoder level computed");
            let logit = ops::upsample_nearest_pow2(&self.heads[level].forward(d)?, (level + 1) as u32);
            side_maps.push(self.side_gates[level].forward(&logit));
            logits.push(logit);
        }
        let refs: Vec<&Tensor> = logits.iter().collect();
        let fused = self.fuse.forward(&ops::concat_channels_all(&refs)?)?;
        let final_map = self.final_gate.forward(&fused);
        Ok(ForwardOutputs { side_maps, final_map, edge_map })
    }

    /// Backpropagates map gradients from the last [`SodNet::forward`],
    /// accumulating into every parameter's `grad`.
    pub fn backward(&mut self, grads: &MapGrads) -> Result<()> {
        let levels = self.cfg.levels();
        if grads.side.len() != levels {
            return Err(Error::invalid("network backward", format!("expected {levels} side gradients")));
        }
        if grads.edge.is_some() != self.edge.is_some() {
            return Err(Error::invalid("network backward", "edge gradient presence must match the edge branch"));
        }

        let g_fused = self.final_gate.backward(&grads.final_map)?;
        let g_cat = self.fuse.backward(&g_fused)?;
        let g_cat = ops::split_channels(&g_cat, &vec![1; levels])?;

        let mut g_dec: Vec<Tensor> = Vec::with_capacity(levels);
        for (level, g_fuse) in g_cat.iter().enumerate() {
            let mut g = self.side_gates[level].backward(&grads.side[level])?;
            g.add_assign(g_fuse)?;
            let g = ops::upsample_nearest_pow2_backward(&g, (level + 1) as u32)?;
            g_dec.push(self.heads[level].backward(&g)?);
        }

        let mut g_feats: Vec<Option<Tensor>> = vec![None; self.cfg.stages];
        let mut g_edge_feat: Option<Tensor> = None;
        let mut carry: Option<Tensor> = None;
        for level in 0..levels {
            let mut g = core::mem::take(&mut g_dec[level]);
            if let Some(c) = carry.take() {
                g.add_assign(&c)?;
            }
            let (g_skip, g_below) = self.decoder[level].backward(&g)?;
            carry = g_below;
            if let Some(edge) = self.edge.as_mut() {
                let mut t = g_skip.clone();
                for pool in edge.pools[level].iter_mut().rev() {
                    t = pool.backward(&t)?;
                }
                accumulate(&mut g_edge_feat, edge.matchers[level].backward(&t)?)?;
            }
            accumulate(&mut g_feats[level + 1], g_skip)?;
        }

        if let (Some(edge), Some(g_edge)) = (self.edge.as_mut(), grads.edge.as_ref()) {
            let g = edge.gate.backward(g_edge)?;
            let g = edge.head.backward(&ops::upsample_nearest2x_backward(&g)?)?;
            accumulate(&mut g_edge_feat, g)?;
            let g_ef = g_edge_feat.take().expect("edge gradient");
            accumulate(&mut g_feats[1], edge.conv.backward(&g_ef)?)?;
        }

        let mut g_in: Option<Tensor> = None;
        for (s, stage) in self.encoder.iter_mut().enumerate().rev() {
            let mut g = g_feats[s].take().unwrap_or_default();
            if let (Some(pool), Some(from_next)) = (stage.pool.as_mut(), g_in.take()) {
                let gp = pool.backward(&from_next)?;
                if g.is_empty() {
                    g = gp;
                } else {
                    g.add_assign(&gp)?;
                }
            }
            let g = stage.conv2.backward(&g)?;
            g_in = Some(stage.conv1.backward(&g)?);
        }
        Ok(())
    }

    /// Forward, deep-supervision loss and backward for one batch. Returns the loss.
    pub fn train_step(&mut self, images: &Tensor, mask: &Tensor, edge: Option<&Tensor>) -> Result<f64> {
        let out = self.forward(images)?;
        let loss = total_loss(&out, mask, edge)?;
        let grads = loss_grads(&out, mask, edge)?;
        self.backward(&grads)?;
        Ok(loss)
    }

    pub fn param_breakdown(&self) -> ParamBreakdown {
        let mut levels = [BlockParamCount::ZERO; 8];
        for (l, (blk, head)) in self.decoder.iter().zip(&self.heads).enumerate() {
            levels[l] = count_params(blk) + count_params(head);
        }
        ParamBreakdown {
            encoder: count_params(&self.encoder),
            decoder: count_params(&self.decoder) + count_params(&self.heads) + count_params(&self.fuse),
            edge: count_params(&self.edge),
            levels,
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) -> Result<()> {
    match slot {
        Some(t) => t.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

impl Parameterized for SodNet {
    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.encoder.visit_params(f);
        self.edge.visit_params(f);
        self.decoder.visit_params(f);
        self.heads.visit_params(f);
        self.fuse.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.encoder.visit_params_mut(f);
        self.edge.visit_params_mut(f);
        self.decoder.visit_params_mut(f);
        self.heads.visit_params_mut(f);
        self.fuse.visit_params_mut(f);
    }
}

fn check_target(map: &Tensor, target: &Tensor) -> Result<()> {
    let (a, b) = (map.shape(), target.shape());
    if a != b {
        return Err(Error::ShapeMismatch { op: "total_loss target", left: a, right: b });
    }
    Ok(())
}

/// Sum of BCE over every side map and the final map against `mask`, plus the
/// edge map against `edge` when present. All weights are 1.
pub fn total_loss(out: &ForwardOutputs, mask: &Tensor, edge: Option<&Tensor>) -> Result<f64> {
    let mut loss = 0.0;
    for m in out.side_maps.iter().chain(core::iter::once(&out.final_map)) {
        check_target(m, mask)?;
        loss += ops::bce_loss(m, mask)?;
    }
    if let Some(em) = &out.edge_map {
        let edge = edge.ok_or_else(|| Error::invalid("total_loss", "edge branch enabled but no edge target"))?;
        check_target(em, edge)?;
        loss += ops::bce_loss(em, edge)?;
    }
    Ok(loss)
}

/// Gradient of [`total_loss`] with respect to each output map.
pub fn loss_grads(out: &ForwardOutputs, mask: &Tensor, edge: Option<&Tensor>) -> Result<MapGrads> {
    let side = out.side_maps.iter().map(|m| ops::bce_backward(m, mask)).collect::<Result<Vec<_>>>()?;
    let final_map = ops::bce_backward(&out.final_map, mask)?;
    let edge = match &out.edge_map {
        Some(em) => {
            let target = edge.ok_or_else(|| Error::invalid("loss_grads", "edge branch enabled but no edge target"))?;
            Some(ops::bce_backward(em, target)?)
        }
        None => None,
    };
    Ok(MapGrads { side, final_map, edge })
}

/// Closed-form parameter totals for a configuration, computed without building
/// the network.
pub fn closed_form_breakdown(cfg: &NetConfig) -> Result<ParamBreakdown> {
    cfg.validate()?;
    let ch = &cfg.stage_channels;
    let mut encoder = BlockParamCount::ZERO;
    let mut c_prev = 3;
    for &c in ch {
        encoder = encoder + closed_form::conv(c_prev, c, 3) + closed_form::conv(c, c, 3);
        c_prev = c;
    }
    let mut levels = [BlockParamCount::ZERO; 8];
    let mut decoder = BlockParamCount::ZERO;
    for s in 1..cfg.stages {
        let c = ch[s];
        let lateral = if s + 1 < cfg.stages { closed_form::conv(ch[s + 1], c, 1) } else { BlockParamCount::ZERO };
        let body = match cfg.decoder {
            DecoderKind::Fire => {
                let se = cfg.se_config(c)?.map_or(BlockParamCount::ZERO, |se| closed_form::se(&se));
                closed_form::fire(&cfg.fire_config(c)?) + se
            }
            DecoderKind::Plain => closed_form::plain(c, c),
        };
        let level = lateral + body + closed_form::conv(c, 1, 1);
        if s - 1 < levels.len() {
            levels[s - 1] = level;
        }
        decoder = decoder + level;
    }
    decoder = decoder + closed_form::conv(cfg.levels(), 1, 1);
    let edge = if cfg.edge_branch {
        let c2 = ch[1];
        closed_form::conv(c2, c2, 3) + closed_form::conv(c2, 1, 1) + (1..cfg.stages).map(|s| closed_form::conv(c2, ch[s], 1)).sum()
    } else {
        BlockParamCount::ZERO
    };
    Ok(ParamBreakdown { encoder, decoder, edge, levels })
}

/// Decoder parameters of `cfg` divided by those of its plain-decoder twin.
pub fn decoder_param_ratio(cfg: &NetConfig) -> Result<f64> {
    let num = closed_form_breakdown(cfg)?.decoder.total;
    let den = closed_form_breakdown(&cfg.plain_twin())?.decoder.total;
    Ok(num as f64 / den as f64)
}

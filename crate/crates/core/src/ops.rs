//! Stateless forward and backward kernels.
//!
//! Every backward function takes whatever the forward needed to retain and the
//! upstream gradient, and returns gradients for each differentiable input.
//! Padding is always zero padding.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{ensure_same, Shape, Tensor};

/// Lower clamp applied to predictions before taking logarithms.
pub const BCE_CLAMP: f64 = 1e-7;

/// `c = a·b + beta·c` for row/column-strided views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    let span = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
        }
    };
    assert!(a.len() >= span(m, k, a_strides));
    assert!(b.len() >= span(k, n, b_strides));
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the assertions above bound every strided access inside the slices,
    // and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvGeometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeometry {
    fn new(input: Shape, weight: Shape, stride: usize, pad: usize) -> Result<Self> {
        if weight.c != input.c {
            return Err(Error::ShapeMismatch { op: "conv2d", left: input, right: weight });
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be at least 1"));
        }
        let (ph, pw) = (input.h + 2 * pad, input.w + 2 * pad);
        if weight.h == 0 || weight.w == 0 || ph < weight.h || pw < weight.w {
            return Err(Error::NonPositiveOutput { op: "conv2d", input, kernel: weight });
        }
        let oh = (ph - weight.h) / stride + 1;
        let ow = (pw - weight.w) / stride + 1;
        Ok(Self { c_in: input.c, h: input.h, w: input.w, kh: weight.h, kw: weight.w, oh, ow, stride, pad })
    }

    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    /// Range of output columns `ox` whose input column `ox*stride + kj - pad` is in bounds.
    fn valid_range(&self, k: usize, out: usize, len: usize) -> (usize, usize) {
        let s = self.stride;
        // ox*s + k >= pad
        let lo = if k >= self.pad { 0 } else { (self.pad - k).div_ceil(s) };
        // ox*s + k - pad <= len - 1
        let hi = if len + self.pad > k { ((len + self.pad - k - 1) / s + 1).min(out) } else { 0 };
        (lo.min(hi), hi)
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let p = self.p();
        let mut row = 0;
        for ci in 0..self.c_in {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let dst = &mut cols[row * p..(row + 1) * p];
                    dst.fill(0.0);
                    let (x_lo, x_hi) = self.valid_range(kj, self.ow, self.w);
                    let (y_lo, y_hi) = self.valid_range(ki, self.oh, self.h);
                    for oy in y_lo..y_hi {
                        let iy = oy * self.stride + ki - self.pad;
                        let src = &plane[iy * self.w..(iy + 1) * self.w];
                        let out = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if self.stride == 1 {
                            let ix0 = x_lo + kj - self.pad;
                            out[x_lo..x_hi].copy_from_slice(&src[ix0..ix0 + (x_hi - x_lo)]);
                        } else {
                            for ox in x_lo..x_hi {
                                out[ox] = src[ox * self.stride + kj - self.pad];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let p = self.p();
        let mut row = 0;
        for ci in 0..self.c_in {
            let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let src = &cols[row * p..(row + 1) * p];
                    let (x_lo, x_hi) = self.valid_range(kj, self.ow, self.w);
                    let (y_lo, y_hi) = self.valid_range(ki, self.oh, self.h);
                    for oy in y_lo..y_hi {
                        let iy = oy * self.stride + ki - self.pad;
                        let dst = &mut plane[iy * self.w..(iy + 1) * self.w];
                        let g = &src[oy * self.ow..(oy + 1) * self.ow];
                        for ox in x_lo..x_hi {
                            dst[ox * self.stride + kj - self.pad] += g[ox];
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn check_bias(bias: &Tensor, c_out: usize) -> Result<()> {
    if bias.len() != c_out {
        return Err(Error::ShapeMismatch {
            op: "conv2d bias",
            left: Shape::new(1, c_out, 1, 1),
            right: bias.shape(),
        });
    }
    Ok(())
}

/// 2-D cross-correlation. `weight` is laid out as (c_out, c_in, kh, kw) and
/// `bias` holds one value per output channel.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let ws = weight.shape();
    let g = ConvGeometry::new(input.shape(), ws, stride, padding)?;
    check_bias(bias, ws.n)?;
    let n = input.shape().n;
    let (c_out, k, p) = (ws.n, g.k(), g.p());
    let mut out = Tensor::zeros(Shape::new(n, c_out, g.oh, g.ow));
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; k * p] };
    for b in 0..n {
        let x = input.item(b);
        let y = out.item_mut(b);
        for (co, &bv) in bias.data().iter().enumerate() {
            y[co * p..(co + 1) * p].fill(bv);
        }
        let rhs: &[f64] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut cols);
            &cols
        };
        gemm(c_out, k, p, weight.data(), (k as isize, 1), rhs, (p as isize, 1), 1.0, y);
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to its three inputs.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    padding: usize,
    upstream: &Tensor,
) -> Result<ConvGrads> {
    let ws = weight.shape();
    let g = ConvGeometry::new(input.shape(), ws, stride, padding)?;
    let n = input.shape().n;
    let expected = Shape::new(n, ws.n, g.oh, g.ow);
    ensure_same("conv2d_backward", expected, upstream.shape())?;
    let (c_out, k, p) = (ws.n, g.k(), g.p());
    let mut dx = Tensor::zeros(input.shape());
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(1, c_out, 1, 1));
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; k * p] };
    let mut dcols = if g.is_pointwise() { Vec::new() } else { vec![0.0; k * p] };
    for b in 0..n {
        let dy = upstream.item(b);
        for (co, d) in db.data_mut().iter_mut().enumerate() {
            *d += dy[co * p..(co + 1) * p].iter().sum::<f64>();
        }
        let x = input.item(b);
        let xcols: &[f64] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut cols);
            &cols
        };
        // dW += dY · colsᵀ
        gemm(c_out, p, k, dy, (p as isize, 1), xcols, (1, p as isize), 1.0, dw.data_mut());
        // dcols = Wᵀ · dY
        if g.is_pointwise() {
            gemm(k, c_out, p, weight.data(), (1, k as isize), dy, (p as isize, 1), 0.0, dx.item_mut(b));
        } else {
            gemm(k, c_out, p, weight.data(), (1, k as isize), dy, (p as isize, 1), 0.0, &mut dcols);
            g.col2im(&dcols, dx.item_mut(b));
        }
    }
    Ok(ConvGrads { input: dx, weight: dw, bias: db })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, input: &Tensor) -> Tensor {
    match kind {
        Activation::Relu => input.map(|x| if x > 0.0 { x } else { 0.0 }),
        Activation::Sigmoid => input.map(sigmoid_scalar),
    }
}

/// Backward of [`activation`]. `input` and `output` are the forward pair.
pub fn activation_backward(kind: Activation, input: &Tensor, output: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    ensure_same("activation_backward", input.shape(), upstream.shape())?;
    let data = match kind {
        Activation::Relu => input
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
        Activation::Sigmoid => {
            ensure_same("activation_backward", output.shape(), upstream.shape())?;
            output.data().iter().zip(upstream.data()).map(|(&y, &g)| g * y * (1.0 - y)).collect()
        }
    };
    Tensor::from_vec(input.shape(), data)
}

/// 2×2 stride-2 max pooling. Returns the pooled tensor and, per output
/// element, the flat input index of its maximum. Ties go to the first element
/// in row-major scan order.
pub fn maxpool2x2(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let s = input.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::OddSpatial { op: "maxpool2x2", shape: s });
    }
    let (oh, ow) = (s.h / 2, s.w / 2);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let mut argmax = Vec::with_capacity(out.len());
    let x = input.data();
    let mut o = 0;
    for plane in 0..s.n * s.c {
        let base = plane * s.plane();
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * s.w + 2 * ox;
                let mut best = i0;
                for cand in [i0 + 1, i0 + s.w, i0 + s.w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.data_mut()[o] = x[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2x2_backward(input_shape: Shape, argmax: &[usize], upstream: &Tensor) -> Result<Tensor> {
    let expected = Shape::new(input_shape.n, input_shape.c, input_shape.h / 2, input_shape.w / 2);
    ensure_same("maxpool2x2_backward", expected, upstream.shape())?;
    if argmax.len() != upstream.len() {
        return Err(Error::invalid("maxpool2x2_backward", "argmax length differs from upstream"));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&i, &g) in argmax.iter().zip(upstream.data()) {
        dx.data_mut()[i] += g;
    }
    Ok(dx)
}

pub fn upsample_nearest2x(input: &Tensor) -> Tensor {
    let s = input.shape();
    let (oh, ow) = (2 * s.h, 2 * s.w);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let x = input.data();
    let y = out.data_mut();
    for plane in 0..s.n * s.c {
        let src = &x[plane * s.plane()..(plane + 1) * s.plane()];
        let dst = &mut y[plane * oh * ow..(plane + 1) * oh * ow];
        for iy in 0..s.h {
            let row = &mut dst[2 * iy * ow..(2 * iy + 1) * ow];
            for ix in 0..s.w {
                let v = src[iy * s.w + ix];
                row[2 * ix] = v;
                row[2 * ix + 1] = v;
            }
            dst.copy_within(2 * iy * ow..(2 * iy + 1) * ow, (2 * iy + 1) * ow);
        }
    }
    out
}

/// Sums each 2×2 replication group back onto its source pixel.
pub fn upsample_nearest2x_backward(upstream: &Tensor) -> Result<Tensor> {
    let s = upstream.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::OddSpatial { op: "upsample_nearest2x_backward", shape: s });
    }
    let (h, w) = (s.h / 2, s.w / 2);
    let mut dx = Tensor::zeros(Shape::new(s.n, s.c, h, w));
    let g = upstream.data();
    let d = dx.data_mut();
    for plane in 0..s.n * s.c {
        let src = &g[plane * s.plane()..(plane + 1) * s.plane()];
        let dst = &mut d[plane * h * w..(plane + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * s.w + 2 * x;
                dst[y * w + x] = src[i] + src[i + 1] + src[i + s.w] + src[i + s.w + 1];
            }
        }
    }
    Ok(dx)
}

/// Repeats [`upsample_nearest2x`] `times` times.
pub fn upsample_nearest_pow2(input: &Tensor, times: u32) -> Tensor {
    let mut out = input.clone();
    for _ in 0..times {
        out = upsample_nearest2x(&out);
    }
    out
}

pub fn upsample_nearest_pow2_backward(upstream: &Tensor, times: u32) -> Result<Tensor> {
    let mut g = upstream.clone();
    for _ in 0..times {
        g = upsample_nearest2x_backward(&g)?;
    }
    Ok(g)
}

/// Per-channel spatial mean, shaped (n, c, 1, 1).
pub fn global_avg_pool(input: &Tensor) -> Tensor {
    let s = input.shape();
    let hw = s.plane();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    for (plane, o) in out.data_mut().iter_mut().enumerate() {
        let sum: f64 = input.data()[plane * hw..(plane + 1) * hw].iter().sum();
        *o = sum / hw as f64;
    }
    out
}

pub fn global_avg_pool_backward(input_shape: Shape, upstream: &Tensor) -> Result<Tensor> {
    ensure_same("global_avg_pool_backward", Shape::new(input_shape.n, input_shape.c, 1, 1), upstream.shape())?;
    let hw = input_shape.plane();
    let mut dx = Tensor::zeros(input_shape);
    for (plane, &g) in upstream.data().iter().enumerate() {
        dx.data_mut()[plane * hw..(plane + 1) * hw].fill(g / hw as f64);
    }
    Ok(dx)
}

/// Affine map per batch row. The input's (c, h, w) extent is flattened into the
/// feature axis; `weight` is (out, in, 1, 1); the result is (n, out, 1, 1).
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let s = input.shape();
    let ws = weight.shape();
    let features = s.item();
    if ws.item() != features {
        return Err(Error::ShapeMismatch { op: "linear", left: s, right: ws });
    }
    if bias.len() != ws.n {
        return Err(Error::ShapeMismatch { op: "linear bias", left: Shape::new(1, ws.n, 1, 1), right: bias.shape() });
    }
    let mut out = Tensor::zeros(Shape::new(s.n, ws.n, 1, 1));
    for (row, o) in out.data_mut().chunks_mut(ws.n).enumerate() {
        let x = input.item(row);
        for (j, oj) in o.iter_mut().enumerate() {
            let wrow = &weight.data()[j * features..(j + 1) * features];
            *oj = bias.data()[j] + wrow.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn linear_backward(input: &Tensor, weight: &Tensor, upstream: &Tensor) -> Result<LinearGrads> {
    let s = input.shape();
    let ws = weight.shape();
    let features = s.item();
    ensure_same("linear_backward", Shape::new(s.n, ws.n, 1, 1), upstream.shape())?;
    if ws.item() != features {
        return Err(Error::ShapeMismatch { op: "linear_backward", left: s, right: ws });
    }
    let mut dx = Tensor::zeros(s);
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(1, ws.n, 1, 1));
    for row in 0..s.n {
        let x = input.item(row);
        let g = upstream.item(row);
        for (j, &gj) in g.iter().enumerate() {
            db.data_mut()[j] += gj;
            let wrow = &weight.data()[j * features..(j + 1) * features];
            for (d, &xv) in dw.data_mut()[j * features..(j + 1) * features].iter_mut().zip(x) {
                *d += gj * xv;
            }
            for (d, &wv) in dx.item_mut(row).iter_mut().zip(wrow) {
                *d += gj * wv;
            }
        }
    }
    Ok(LinearGrads { input: dx, weight: dw, bias: db })
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
        return Err(Error::ShapeMismatch { op: "concat_channels", left: sa, right: sb });
    }
    let shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..sa.n {
        data.extend_from_slice(a.item(n));
        data.extend_from_slice(b.item(n));
    }
    Tensor::from_vec(shape, data)
}

/// Splits an upstream gradient of [`concat_channels`] into the parts for `a`
/// (its first `a_channels` channels) and `b`.
pub fn concat_channels_backward(upstream: &Tensor, a_channels: usize) -> Result<(Tensor, Tensor)> {
    let s = upstream.shape();
    if a_channels > s.c {
        return Err(Error::invalid("concat_channels_backward", "split point beyond channel count"));
    }
    let sa = Shape::new(s.n, a_channels, s.h, s.w);
    let sb = Shape::new(s.n, s.c - a_channels, s.h, s.w);
    let mut da = Vec::with_capacity(sa.len());
    let mut db = Vec::with_capacity(sb.len());
    for n in 0..s.n {
        let item = upstream.item(n);
        da.extend_from_slice(&item[..sa.item()]);
        db.extend_from_slice(&item[sa.item()..]);
    }
    Ok((Tensor::from_vec(sa, da)?, Tensor::from_vec(sb, db)?))
}

/// Channel concatenation of several tensors, in order.
pub fn concat_channels_all(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return Err(Error::Empty("concat_channels_all"));
    };
    let s0 = first.shape();
    let mut c = 0;
    for p in parts {
        let s = p.shape();
        if (s.n, s.h, s.w) != (s0.n, s0.h, s0.w) {
            return Err(Error::ShapeMismatch { op: "concat_channels_all", left: s0, right: s });
        }
        c += s.c;
    }
    let shape = Shape::new(s0.n, c, s0.h, s0.w);
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..s0.n {
        for p in parts {
            data.extend_from_slice(p.item(n));
        }
    }
    Tensor::from_vec(shape, data)
}

/// Inverse of [`concat_channels_all`] for gradients: splits `upstream` into
/// pieces with the given channel counts.
pub fn split_channels(upstream: &Tensor, channels: &[usize]) -> Result<Vec<Tensor>> {
    let s = upstream.shape();
    if channels.iter().sum::<usize>() != s.c {
        return Err(Error::invalid("split_channels", "channel counts do not sum to the input"));
    }
    let mut parts: Vec<Vec<f64>> = channels.iter().map(|&c| Vec::with_capacity(s.n * c * s.plane())).collect();
    for n in 0..s.n {
        let mut off = 0;
        for (part, &c) in parts.iter_mut().zip(channels) {
            let k = c * s.plane();
            part.extend_from_slice(&upstream.item(n)[off..off + k]);
            off += k;
        }
    }
    parts
        .into_iter()
        .zip(channels)
        .map(|(d, &c)| Tensor::from_vec(Shape::new(s.n, c, s.h, s.w), d))
        .collect()
}

/// Multiplies every plane (n, c) of `x` by `scale[n, c]`.
pub fn channel_scale(x: &Tensor, scale: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    ensure_same("channel_scale", Shape::new(s.n, s.c, 1, 1), scale.shape())?;
    let hw = s.plane();
    let mut out = x.clone();
    for (plane, &k) in scale.data().iter().enumerate() {
        out.data_mut()[plane * hw..(plane + 1) * hw].iter_mut().for_each(|v| *v *= k);
    }
    Ok(out)
}

/// Returns (d/dx, d/dscale).
pub fn channel_scale_backward(x: &Tensor, scale: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    ensure_same("channel_scale_backward", x.shape(), upstream.shape())?;
    let dx = channel_scale(upstream, scale)?;
    let hw = x.shape().plane();
    let mut ds = Tensor::zeros(scale.shape());
    for (plane, d) in ds.data_mut().iter_mut().enumerate() {
        let r = plane * hw..(plane + 1) * hw;
        *d = x.data()[r.clone()].iter().zip(&upstream.data()[r]).map(|(a, b)| a * b).sum();
    }
    Ok((dx, ds))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut out = a.clone();
    out.add_assign(b)?;
    Ok(out)
}

fn check_targets(pred: &Tensor, target: &Tensor) -> Result<()> {
    ensure_same("bce_loss", pred.shape(), target.shape())?;
    if pred.is_empty() {
        return Err(Error::Empty("bce_loss"));
    }
    for (index, &value) in target.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::TargetOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Mean binary cross-entropy with predictions clamped into
/// `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_targets(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p))
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`bce_loss`] with respect to `pred`; zero where the clamp is active.
pub fn bce_backward(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_targets(pred, target)?;
    let n = pred.len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                0.0
            } else {
                (p - t) / (p * (1.0 - p)) / n
            }
        })
        .collect();
    Tensor::from_vec(pred.shape(), data)
}

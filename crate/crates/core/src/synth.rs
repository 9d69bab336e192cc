//! Deterministic synthetic saliency samples: saturated shapes over a
//! low-frequency grey texture, with exact masks and boundary-band edge maps.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub const MIN_SIZE: usize = 16;
pub const MIN_FOREGROUND: f64 = 0.05;
pub const MAX_FOREGROUND: f64 = 0.6;
pub const PIXEL_NOISE: f64 = 0.02;
const NOISE_GRID: usize = 4;
const MIN_CONTRAST: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub id: u64,
    pub seed: u64,
    /// `1 x 3 x size x size`, values in `[0, 1]`.
    pub image: Tensor,
    /// `1 x 1 x size x size`, values in `{0, 1}`.
    pub mask: Tensor,
    pub edge: Tensor,
}

impl SampleRecord {
    pub fn foreground_fraction(&self) -> f64 {
        self.mask.mean()
    }
}

/// Seed for sample `id` of a dataset generated from `dataset_seed`.
pub fn sample_seed(dataset_seed: u64, id: u64) -> u64 {
    splitmix(splitmix(dataset_seed) ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug)]
enum ShapeKind {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, angle: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Triangle { p: [(f64, f64); 3] },
}

impl ShapeKind {
    fn random(rng: &mut ChaCha8Rng, size: f64) -> Self {
        let cx = rng.random_range(0.2..0.8) * size;
        let cy = rng.random_range(0.2..0.8) * size;
        match rng.random_range(0..3) {
            0 => ShapeKind::Ellipse {
                cx,
                cy,
                rx: rng.random_range(0.08..0.3) * size,
                ry: rng.random_range(0.08..0.3) * size,
                angle: rng.random_range(0.0..core::f64::consts::PI),
            },
            1 => {
                let hw = rng.random_range(0.08..0.28) * size;
                let hh = rng.random_range(0.08..0.28) * size;
                ShapeKind::Rect { x0: cx - hw, y0: cy - hh, x1: cx + hw, y1: cy + hh }
            }
            _ => {
                let r = rng.random_range(0.15..0.35) * size;
                let base = rng.random_range(0.0..core::f64::consts::TAU);
                let mut p = [(0.0, 0.0); 3];
                for (k, v) in p.iter_mut().enumerate() {
                    let a = base + k as f64 * core::f64::consts::TAU / 3.0 + rng.random_range(-0.4..0.4);
                    *v = (cx + r * libm::cos(a), cy + r * libm::sin(a));
                }
                ShapeKind::Triangle { p }
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ShapeKind::Ellipse { cx, cy, rx, ry, angle } => {
                let (s, c) = (libm::sin(angle), libm::cos(angle));
                let (dx, dy) = (x - cx, y - cy);
                let u = (c * dx + s * dy) / rx;
                let v = (-s * dx + c * dy) / ry;
                u * u + v * v <= 1.0
            }
            ShapeKind::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            ShapeKind::Triangle { p } => {
                let cross = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
                let d = [cross(p[0], p[1]), cross(p[1], p[2]), cross(p[2], p[0])];
                d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
            }
        }
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let sector = libm::floor(h6);
    let f = h6 - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match sector as i64 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Bilinear value noise with smoothstep weights on a coarse random grid.
fn value_noise(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let g = NOISE_GRID + 1;
    let grid: Vec<f64> = (0..g * g).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cell = size as f64 / NOISE_GRID as f64;
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        let fy = (y as f64 + 0.5) / cell;
        let iy = (fy as usize).min(NOISE_GRID - 1);
        let ty = smooth(fy - iy as f64);
        for x in 0..size {
            let fx = (x as f64 + 0.5) / cell;
            let ix = (fx as usize).min(NOISE_GRID - 1);
            let tx = smooth(fx - ix as f64);
            let at = |i: usize, j: usize| grid[j * g + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            out[y * size + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    out
}

fn raster(shapes: &[ShapeKind], size: usize) -> Vec<Option<usize>> {
    let mut owner = vec![None; size * size];
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            // Later shapes are painted over earlier ones.
            owner[y * size + x] = shapes.iter().rposition(|s| s.contains(px, py));
        }
    }
    owner
}

/// One sample, a pure function of `(seed, size)`.
pub fn generate_sample(seed: u64, size: usize) -> Result<SampleRecord> {
    generate_with_id(0, seed, size)
}

/// Sample `id` of the dataset seeded by `dataset_seed`.
pub fn generate_indexed(dataset_seed: u64, id: u64, size: usize) -> Result<SampleRecord> {
    generate_with_id(id, sample_seed(dataset_seed, id), size)
}

fn generate_with_id(id: u64, seed: u64, size: usize) -> Result<SampleRecord> {
    if size < MIN_SIZE {
        return Err(Error::invalid("generate_sample", alloc::format!("size must be >= {MIN_SIZE}, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size * size;

    let (shapes, owner) = loop {
        let count = rng.random_range(1..=3);
        let shapes: Vec<ShapeKind> = (0..count).map(|_| ShapeKind::random(&mut rng, size as f64)).collect();
        let owner = raster(&shapes, size);
        let fg = owner.iter().filter(|o| o.is_some()).count() as f64 / n as f64;
        if (MIN_FOREGROUND..=MAX_FOREGROUND).contains(&fg) {
            break (shapes, owner);
        }
    };

    let grey = rng.random_range(0.3..0.7);
    let tint: [f64; 3] = core::array::from_fn(|_| rng.random_range(-0.05..0.05));
    let amplitude = rng.random_range(0.1..0.25);
    let texture = value_noise(&mut rng, size);
    let background: [f64; 3] = core::array::from_fn(|c| grey + tint[c]);

    let colors: Vec<[f64; 3]> = shapes
        .iter()
        .map(|_| loop {
            let c = hsv(rng.random_range(0.0..1.0), rng.random_range(0.65..1.0), rng.random_range(0.55..1.0));
            let contrast = (0..3).map(|k| (c[k] - background[k]).abs()).fold(0.0, f64::max);
            if contrast >= MIN_CONTRAST {
                break c;
            }
        })
        .collect();

    let noise = Normal::new(0.0, PIXEL_NOISE).expect("valid sigma");
    let mut image = Tensor::zeros(Shape::new(1, 3, size, size));
    let mut mask = Tensor::zeros(Shape::new(1, 1, size, size));
    for i in 0..n {
        let fg = owner[i].map(|s| colors[s]);
        if fg.is_some() {
            mask.data_mut()[i] = 1.0;
        }
        for c in 0..3 {
            let base = match fg {
                Some(col) => col[c],
                None => background[c] + amplitude * texture[i],
            };
            let v = base + noise.sample(&mut rng);
            image.data_mut()[c * n + i] = v.clamp(0.0, 1.0);
        }
    }
    let edge = edge_from_mask(&mask)?;
    Ok(SampleRecord { id, seed, image, mask, edge })
}

/// Morphological gradient `dilate3x3(mask) - erode3x3(mask)` of every binary
/// channel, with replicate-edge padding.
pub fn edge_from_mask(mask: &Tensor) -> Result<Tensor> {
    if let Some((index, &value)) = mask.data().iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryMask { index, value });
    }
    let s = mask.shape();
    let mut out = Tensor::zeros(s);
    let (h, w) = (s.h as isize, s.w as isize);
    for plane in 0..s.n * s.c {
        let src = &mask.data()[plane * s.plane()..(plane + 1) * s.plane()];
        let dst = &mut out.data_mut()[plane * s.plane()..(plane + 1) * s.plane()];
        for y in 0..h {
            for x in 0..w {
                let (mut hi, mut lo) = (0.0f64, 1.0f64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let yy = (y + dy).clamp(0, h - 1);
                        let xx = (x + dx).clamp(0, w - 1);
                        let v = src[(yy * w + xx) as usize];
                        hi = hi.max(v);
                        lo = lo.min(v);
                    }
                }
                dst[(y * w + x) as usize] = hi - lo;
            }
        }
    }
    Ok(out)
}

//! Binary netpbm: P5 (greyscale) and P6 (RGB), maxval 255.
//!
//! Values are quantized with `round(v * 255)` and decoded as `byte / 255`, so
//! a round trip is off by at most half a quantization step.

use std::fs;
use std::path::Path;

use csod_core::{Shape, Tensor};
use thiserror::Error;

/// Largest accepted `width * height`.
pub const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("bad magic {found:?}: expected P5 or P6")]
    BadMagic { found: String },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0}: only 255 is accepted")]
    UnsupportedMaxval(u64),
    #[error("dimensions {width}x{height} overflow the {MAX_PIXELS}-pixel limit")]
    DimensionOverflow { width: u64, height: u64 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("tensor of shape {0} is neither 1x1xHxW nor 1x3xHxW")]
    UnsupportedShape(Shape),
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round() as u8
}

pub fn encode(t: &Tensor) -> Result<Vec<u8>, PnmError> {
    let s = t.shape();
    let magic = match (s.n, s.c) {
        (1, 1) => "P5",
        (1, 3) => "P6",
        _ => return Err(PnmError::UnsupportedShape(s)),
    };
    if let Some((index, &value)) = t.data().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(PnmError::ValueOutOfRange { index, value });
    }
    let mut out = format!("{magic}\n{} {}\n255\n", s.w, s.h).into_bytes();
    let plane = s.plane();
    out.reserve(plane * s.c);
    for i in 0..plane {
        for c in 0..s.c {
            out.push(quantize(t.data()[c * plane + i]));
        }
    }
    Ok(out)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, PnmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::BadHeader(format!("missing {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        match text.parse::<u64>() {
            Ok(v) => Ok(v),
            Err(_) if what == "maxval" => Err(PnmError::UnsupportedMaxval(u64::MAX)),
            Err(_) => Err(PnmError::DimensionOverflow { width: u64::MAX, height: u64::MAX }),
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Tensor, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        other => {
            return Err(PnmError::BadMagic { found: String::from_utf8_lossy(other.unwrap_or(bytes)).into_owned() });
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader(format!("zero dimension {width}x{height}")));
    }
    let pixels = width.checked_mul(height).filter(|&p| p <= MAX_PIXELS as u64);
    let Some(pixels) = pixels else {
        return Err(PnmError::DimensionOverflow { width, height });
    };
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(PnmError::BadHeader("maxval must be followed by one whitespace byte".into())),
    }
    let pixels = pixels as usize;
    let payload = &bytes[h.pos..];
    let expected = pixels * channels;
    if payload.len() < expected {
        return Err(PnmError::Truncated { expected, found: payload.len() });
    }
    let shape = Shape::new(1, channels, height as usize, width as usize);
    let mut t = Tensor::zeros(shape);
    for i in 0..pixels {
        for c in 0..channels {
            t.data_mut()[c * pixels + i] = payload[i * channels + c] as f64 / 255.0;
        }
    }
    Ok(t)
}

pub fn write(path: &Path, t: &Tensor) -> Result<(), PnmError> {
    fs::write(path, encode(t)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Tensor, PnmError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_written_p5() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let t = decode(&bytes).unwrap();
        assert_eq!(t.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(t.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn endpoints_are_exact() {
        let t = Tensor::from_vec(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap();
        assert_eq!(decode(&encode(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn rgb_is_interleaved() {
        let t = Tensor::from_vec(Shape::new(1, 3, 1, 2), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let bytes = encode(&t).unwrap();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[255, 0, 0, 0, 255, 0]);
    }

    #[test]
    fn comments_in_header() {
        let mut bytes = b"P5 # grey\n# size next\n1 1 255\n".to_vec();
        bytes.push(51);
        assert_eq!(decode(&bytes).unwrap().data(), &[0.2]);
    }

    #[test]
    fn distinct_failures() {
        assert!(matches!(decode(b"P3\n1 1\n255\n\0"), Err(PnmError::BadMagic { .. })));
        assert!(matches!(decode(b"P5\n100000 100000\n255\n"), Err(PnmError::DimensionOverflow { .. })));
        assert!(matches!(decode(b"P5\n99999999999999999999 1\n255\n"), Err(PnmError::DimensionOverflow { .. })));
        assert!(matches!(decode(b"P5\n2 2\n255\n\x01\x02"), Err(PnmError::Truncated { expected: 4, found: 2 })));
        assert!(matches!(decode(b"P5\n1 1\n65535\n\0\0"), Err(PnmError::UnsupportedMaxval(65535))));
        assert!(matches!(decode(b"P5\n1\n"), Err(PnmError::BadHeader(_))));
        let bad = Tensor::full(Shape::new(1, 1, 1, 1), 1.5);
        assert!(matches!(encode(&bad), Err(PnmError::ValueOutOfRange { .. })));
        assert!(matches!(encode(&Tensor::zeros(Shape::new(1, 2, 1, 1))), Err(PnmError::UnsupportedShape(_))));
    }
}

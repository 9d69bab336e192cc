//! Network checkpoints.
//!
//! Layout: magic `CSOD`, format version (u16 LE), the [`NetConfig`] as
//! `key=value` lines closed by an empty line, the record count (u32 LE), then
//! one record per parameter in visit order: id (u64), rank (u8), dims (u32
//! each) and the values as little-endian f64. Biases are stored with rank 1,
//! weights with rank 4.

use std::fs;
use std::path::Path;

use csod_core::net::{InitScheme, NetConfig, SodNet};
use csod_core::{Param, ParamKind, Parameterized};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"CSOD";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: magic {found:?} is not \"CSOD\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found} (this build reads {VERSION})")]
    UnsupportedVersion { found: u16 },
    #[error("truncated checkpoint: ran out of bytes reading {what}")]
    Truncated { what: &'static str },
    #[error("parameter {index} (id {id}) has dims {found:?}, network expects {expected:?}")]
    ShapeMismatch { index: usize, id: u64, expected: Vec<u32>, found: Vec<u32> },
    #[error("checkpoint holds {found} parameter records, network has {expected}")]
    RecordCount { expected: usize, found: usize },
    #[error("invalid stored configuration: {0}")]
    Config(#[from] csod_core::Error),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn dims(p: &Param) -> Vec<u32> {
    let s = p.value.shape();
    match p.kind {
        ParamKind::Bias => vec![s.len() as u32],
        ParamKind::Weight => [s.n, s.c, s.h, s.w].iter().map(|&d| d as u32).collect(),
    }
}

fn header(cfg: &NetConfig) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend(VERSION.to_le_bytes());
    out.extend(cfg.to_kv().bytes());
    out.push(b'\n');
    out
}

/// Exact size in bytes of the checkpoint of `net`.
pub fn encoded_len(net: &SodNet) -> usize {
    let mut len = header(net.config()).len() + 4;
    net.visit_params(&mut |p| len += 8 + 1 + 4 * dims(p).len() + 8 * p.len());
    len
}

pub fn encode(net: &SodNet) -> Vec<u8> {
    let mut out = header(net.config());
    out.reserve(encoded_len(net));
    let mut count = 0u32;
    net.visit_params(&mut |_| count += 1);
    out.extend(count.to_le_bytes());
    net.visit_params(&mut |p| {
        out.extend(p.id.0.to_le_bytes());
        let d = dims(p);
        out.push(d.len() as u8);
        for x in d {
            out.extend(x.to_le_bytes());
        }
        for v in p.value.data() {
            out.extend(v.to_le_bytes());
        }
    });
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated { what })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SodNet, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic").map_err(|_| CheckpointError::BadMagic { found: bytes.to_vec() })?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic { found: magic.to_vec() });
    }
    let version = u16::from_le_bytes(r.array("version")?);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let rest = &bytes[r.pos..];
    let end = rest.windows(2).position(|w| w == b"\n\n").ok_or(CheckpointError::Truncated { what: "configuration" })?;
    let text = std::str::from_utf8(&rest[..end + 1])
        .map_err(|_| csod_core::Error::InvalidConfig("configuration is not UTF-8".into()))?;
    let cfg = NetConfig::from_kv(text)?;
    r.pos += end + 2;

    let mut net = SodNet::new(&cfg, InitScheme::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut expected = 0usize;
    net.visit_params(&mut |_| expected += 1);
    let found = u32::from_le_bytes(r.array("record count")?) as usize;
    if found != expected {
        return Err(CheckpointError::RecordCount { expected, found });
    }

    let mut result = Ok(());
    let mut index = 0;
    net.visit_params_mut(&mut |p| {
        if result.is_ok() {
            result = read_record(&mut r, p, index);
        }
        index += 1;
    });
    result?;
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(net)
}

fn read_record(r: &mut Reader<'_>, p: &mut Param, index: usize) -> Result<(), CheckpointError> {
    let id = u64::from_le_bytes(r.array("parameter id")?);
    let rank = r.array::<1>("rank")?[0] as usize;
    let found: Vec<u32> = (0..rank).map(|_| r.array("dims").map(u32::from_le_bytes)).collect::<Result<_, _>>()?;
    let expected = dims(p);
    if found != expected || id != p.id.0 {
        return Err(CheckpointError::ShapeMismatch { index, id, expected, found });
    }
    let raw = r.take(8 * p.len(), "parameter values")?;
    for (v, chunk) in p.value.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    Ok(())
}

pub fn save(path: &Path, net: &SodNet) -> Result<(), CheckpointError> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SodNet, CheckpointError> {
    decode(&fs::read(path)?)
}

/// Parameter element count stored in a checkpoint.
pub fn element_count(net: &SodNet) -> usize {
    net.param_elements()
}


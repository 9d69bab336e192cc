//! On-disk synthetic corpus: image/mask/edge triplets plus a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use csod_core::synth::generate_indexed;
use csod_core::Tensor;

use crate::error::CliError;
use crate::pnm;

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub id: u64,
    pub img: String,
    pub msk: String,
    pub edg: String,
}

impl Entry {
    fn for_id(id: u64) -> Self {
        Self { id, img: format!("img_{id:05}.ppm"), msk: format!("msk_{id:05}.pgm"), edg: format!("edg_{id:05}.pgm") }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub seed: u64,
    pub size: usize,
    pub train: Vec<Entry>,
    pub test: Vec<Entry>,
}

/// One loaded sample.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: u64,
    pub image: Tensor,
    pub mask: Tensor,
    pub edge: Tensor,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> &[Entry] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# size={}", self.size);
        let _ = writeln!(s, "# train={}", self.train.len());
        let _ = writeln!(s, "# test={}", self.test.len());
        for e in self.train.iter().chain(&self.test) {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", e.id, e.img, e.msk, e.edg);
        }
        s
    }

    pub fn load(root: &Path) -> Result<Self, CliError> {
        let path = root.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
        let mut meta = std::collections::BTreeMap::new();
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("line {}: bad header {line:?}", n + 1)))?;
                let v: u64 = v.parse().map_err(|_| bad(format!("line {}: {k} is not a number", n + 1)))?;
                meta.insert(k.to_string(), v);
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let [id, img, msk, edg] = f[..] else {
                return Err(bad(format!("line {}: expected id<TAB>img<TAB>msk<TAB>edg", n + 1)));
            };
            let id = id.parse().map_err(|_| bad(format!("line {}: bad id {id:?}", n + 1)))?;
            entries.push(Entry { id, img: img.into(), msk: msk.into(), edg: edg.into() });
        }
        let get = |k: &str| meta.get(k).copied().ok_or_else(|| bad(format!("missing header {k}")));
        let (seed, size, train) = (get("seed")?, get("size")? as usize, get("train")? as usize);
        let test = get("test")? as usize;
        if entries.len() != train + test {
            return Err(bad(format!("{} entries but train + test = {}", entries.len(), train + test)));
        }
        let test_entries = entries.split_off(train);
        Ok(Self { root: root.to_path_buf(), seed, size, train: entries, test: test_entries })
    }

    pub fn read(&self, e: &Entry) -> Result<Sample, CliError> {
        let load = |name: &str| {
            let p = self.root.join(name);
            pnm::read(&p).map_err(|source| CliError::Image { path: p, source })
        };
        Ok(Sample { id: e.id, image: load(&e.img)?, mask: load(&e.msk)?, edge: load(&e.edg)? })
    }

    pub fn read_split(&self, split: Split) -> Result<Vec<Sample>, CliError> {
        self.split(split).iter().map(|e| self.read(e)).collect()
    }
}

/// Writes `train + test` samples (ids `0..train` train, the rest test).
pub fn generate_dataset(seed: u64, size: usize, train: usize, test: usize, root: &Path) -> Result<DatasetManifest, CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let mut entries = Vec::with_capacity(train + test);
    for id in 0..(train + test) as u64 {
        let s = generate_indexed(seed, id, size)?;
        let e = Entry::for_id(id);
        for (name, t) in [(&e.img, &s.image), (&e.msk, &s.mask), (&e.edg, &s.edge)] {
            let p = root.join(name);
            pnm::write(&p, t).map_err(|source| CliError::Image { path: p, source })?;
        }
        entries.push(e);
    }
    let test_entries = entries.split_off(train);
    let m = DatasetManifest { root: root.to_path_buf(), seed, size, train: entries, test: test_entries };
    let path = root.join(MANIFEST);
    fs::write(&path, m.to_text()).map_err(|e| CliError::io(&path, e))?;
    Ok(m)
}

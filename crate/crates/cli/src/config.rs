//! Run configuration: flat `key=value` lines, `#` comments, dotted keys for
//! the network (`net.*`), optimizer (`optim.*`) and initialization (`init.*`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use csod_core::layers::Init;
use csod_core::net::{InitScheme, NetConfig};
use csod_core::optim::{Algorithm, EpsPlacement, OptimizerConfig};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    /// `alpha` is replaced by the scheduled learning rate during training.
    pub optimizer: OptimizerConfig,
    pub init: InitScheme,
    pub epochs: usize,
    pub accumulation: usize,
    pub base_lr: f64,
    pub seed: u64,
    pub data_root: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            optimizer: OptimizerConfig::new(Algorithm::Adax),
            init: InitScheme { encoder: Init::HeNormal, decoder: Init::default() },
            epochs: 18,
            accumulation: 10,
            base_lr: 5e-5,
            seed: 0,
            data_root: PathBuf::from("data"),
            out_dir: PathBuf::from("run"),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn init_name(i: Init) -> String {
    match i {
        Init::HeNormal => "he".into(),
        Init::TruncatedNormal { std } => format!("truncated_normal:{std}"),
    }
}

fn parse_init(key: &str, v: &str) -> Result<Init, CliError> {
    match v.split_once(':') {
        None if v == "he" => Ok(Init::HeNormal),
        None if v == "truncated_normal" => Ok(Init::default()),
        Some(("truncated_normal", std)) => Ok(Init::TruncatedNormal { std: num(key, std)? }),
        _ => Err(CliError::Config(format!("{key}: expected he or truncated_normal[:std], got {v:?}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let o = &mut self.optimizer;
        match key {
            "epochs" => self.epochs = num(key, v)?,
            "accumulation" => self.accumulation = num(key, v)?,
            "base_lr" => self.base_lr = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "data_root" => self.data_root = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "init.encoder" => self.init.encoder = parse_init(key, v)?,
            "init.decoder" => self.init.decoder = parse_init(key, v)?,
            "optim.algorithm" => {
                let alg = Algorithm::parse(v).ok_or_else(|| CliError::Config(format!("{key}: unknown optimizer {v:?}")))?;
                *o = OptimizerConfig::new(alg);
            }
            "optim.beta1" => o.beta1 = num(key, v)?,
            "optim.beta2" => o.beta2 = num(key, v)?,
            "optim.eps" => o.eps = num(key, v)?,
            "optim.eps_placement" => {
                o.eps_placement = match v {
                    "inside" => EpsPlacement::InsideRoot,
                    "outside" => EpsPlacement::OutsideRoot,
                    _ => return Err(CliError::Config(format!("{key}: expected inside or outside, got {v:?}"))),
                }
            }
            "optim.weight_decay" => o.weight_decay = num(key, v)?,
            "optim.momentum" => o.momentum = num(key, v)?,
            _ => match key.strip_prefix("net.") {
                Some(k) => self.net.set(k, v).map_err(|e| CliError::Config(e.to_string()))?,
                None => return Err(CliError::Config(format!("unknown key {key:?}"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |e: csod_core::Error| CliError::Config(e.to_string());
        self.net.validate().map_err(err)?;
        self.optimizer.with_alpha(self.base_lr).validate().map_err(err)?;
        if self.epochs == 0 || self.accumulation == 0 {
            return Err(CliError::Config("epochs and accumulation must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses a configuration; `optim.algorithm` resets the other `optim.*`
    /// keys to that algorithm's defaults, so it is applied first.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.sort_by_key(|(k, _)| k != "optim.algorithm");
        let mut cfg = Self::default();
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let o = &self.optimizer;
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "data_root={}", self.data_root.display());
        let _ = writeln!(s, "out_dir={}", self.out_dir.display());
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "accumulation={}", self.accumulation);
        let _ = writeln!(s, "base_lr={:e}", self.base_lr);
        let _ = writeln!(s, "init.encoder={}", init_name(self.init.encoder));
        let _ = writeln!(s, "init.decoder={}", init_name(self.init.decoder));
        let _ = writeln!(s, "optim.algorithm={}", o.algorithm.name());
        let _ = writeln!(s, "optim.beta1={}", o.beta1);
        let _ = writeln!(s, "optim.beta2={}", o.beta2);
        let _ = writeln!(s, "optim.eps={:e}", o.eps);
        let placement = match o.eps_placement {
            EpsPlacement::InsideRoot => "inside",
            EpsPlacement::OutsideRoot => "outside",
        };
        let _ = writeln!(s, "optim.eps_placement={placement}");
        let _ = writeln!(s, "optim.weight_decay={}", o.weight_decay);
        let _ = writeln!(s, "optim.momentum={}", o.momentum);
        for line in self.net.to_kv().lines() {
            let _ = writeln!(s, "net.{line}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_recipe() {
        let c = RunConfig::default();
        assert_eq!((c.epochs, c.accumulation, c.base_lr), (18, 10, 5e-5));
        assert_eq!(c.optimizer.algorithm, Algorithm::Adax);
        assert_eq!(c.optimizer.weight_decay, 0.0005);
        assert_eq!(c.optimizer.beta1, 0.9);
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = RunConfig::parse("optim.eps = 1e-6\noptim.algorithm=adam # comment\nnet.stages=3\nnet.stage_channels=8,16,32\n").unwrap();
        assert_eq!(c.optimizer.algorithm, Algorithm::Adam);
        assert_eq!(c.optimizer.eps, 1e-6);
        c.init.decoder = Init::TruncatedNormal { std: 0.02 };
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        for bad in ["bogus=1", "net.bogus=1", "epochs=ten", "epochs", "optim.algorithm=lion", "optim.beta2=0\noptim.algorithm=adax", "net.stages=3"] {
            let e = RunConfig::parse(bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
        let msg = RunConfig::parse("bogus=1").unwrap_err().to_string();
        assert!(msg.contains("bogus"));
    }
}

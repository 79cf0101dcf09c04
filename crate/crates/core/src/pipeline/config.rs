use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{Dataset, FoldScheme, HyperParams};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

/// Everything that steers a batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hp: HyperParams,
    pub out_dir: PathBuf,
    /// Worker threads; never affects outputs.
    pub workers: usize,
    pub seed: u64,
    pub dataset: Option<Dataset>,
    pub fold: Option<u32>,
    pub scheme: Option<FoldScheme>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hp: HyperParams::default(),
            out_dir: PathBuf::from("out"),
            workers: 1,
            seed: DEFAULT_SEED,
            dataset: None,
            fold: None,
            scheme: None,
        }
    }
}

impl RunConfig {
    /// Reads `key=value` lines; `#` starts a comment. Keys are the
    /// hyperparameter names plus `seed`, `workers`, `out`, `dataset`,
    /// `fold` and `scheme`. A relative `out` is taken from the working
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", idx + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.hp.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "workers" => self.workers = value.parse().map_err(|_| bad())?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(value),
            "dataset" => self.dataset = Some(value.parse().map_err(|_| bad())?),
            "fold" => self.fold = Some(value.parse().map_err(|_| bad())?),
            "scheme" => self.scheme = Some(value.parse().map_err(|_| bad())?),
            _ => self.hp.set(key, value)?,
        }
        Ok(())
    }

    /// SHA-256 over the canonical settings that influence outputs
    /// (hyperparameters and seed; not the output path or worker count).
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.hp.to_config_string().as_bytes());
        h.update(format!("seed={}\n", self.seed).as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_hash() {
        let cfg = RunConfig::parse("# comment\ntau=0.7\nseed=7 # trailing\nworkers=4\n").unwrap();
        assert_eq!(cfg.hp.tau_fuse, 0.7);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.workers, 4);
        let mut other = cfg.clone();
        other.workers = 1;
        other.out_dir = PathBuf::from("elsewhere");
        assert_eq!(cfg.config_hash(), other.config_hash());
        other.seed = 8;
        assert_ne!(cfg.config_hash(), other.config_hash());
        assert_eq!(cfg.config_hash().len(), 64);
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunConfig::parse("tau\n").is_err());
        assert!(RunConfig::parse("unknown=1\n").is_err());
        assert!(RunConfig::parse("k_eig=0\n").is_err());
    }
}

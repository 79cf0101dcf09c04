use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMode {
    Dense,
    Lanczos,
    /// Dense below [`HyperParams::dense_eigen_max`] nodes, Lanczos above.
    #[default]
    Auto,
}

impl fmt::Display for EigenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EigenMode::Dense => "dense",
            EigenMode::Lanczos => "lanczos",
            EigenMode::Auto => "auto",
        })
    }
}

impl FromStr for EigenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(EigenMode::Dense),
            "lanczos" => Ok(EigenMode::Lanczos),
            "auto" => Ok(EigenMode::Auto),
            _ => Err(Error::InvalidValue(format!("unknown eigen mode `{s}`"))),
        }
    }
}

/// Loss weights, graph construction and fusion knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Weight of the affine shape term in the total loss.
    pub lambda1: f64,
    /// Weight of the edge BCE term in the total loss.
    pub lambda2: f64,
    /// Weight of the colour/position KNN affinity added to the semantic one.
    pub lambda_affinity: f64,
    pub k_eig: usize,
    pub k_nn: usize,
    pub tau_fuse: f64,
    pub n_dense_max: usize,
    /// Divisor applied to cosine logits before the softmax.
    pub temperature: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub eigen_mode: EigenMode,
    pub dense_eigen_max: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 1.0,
            lambda_affinity: 0.0,
            k_eig: 5,
            k_nn: 8,
            tau_fuse: 0.5,
            n_dense_max: 8192,
            temperature: 1.0,
            patch_rows: 3,
            patch_cols: 6,
            eigen_mode: EigenMode::Auto,
            dense_eigen_max: 256,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_affinity", self.lambda_affinity),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidValue(format!("{name} = {w} must be >= 0")));
            }
        }
        if self.k_eig == 0 || self.k_nn == 0 {
            return Err(Error::InvalidValue("k_eig and k_nn must be >= 1".into()));
        }
        // tau above 1 is allowed: it switches fusion off
        if !(self.tau_fuse.is_finite() && self.tau_fuse >= 0.0) {
            return Err(Error::InvalidValue(format!(
                "tau_fuse = {} must be >= 0",
                self.tau_fuse
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidValue("temperature must be > 0".into()));
        }
        if self.patch_rows == 0 || self.patch_cols == 0 || self.n_dense_max == 0 {
            return Err(Error::InvalidValue(
                "patch grid and n_dense_max must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "lambda1" => self.lambda1 = num(key, value)?,
            "lambda2" => self.lambda2 = num(key, value)?,
            "lambda_affinity" | "lambda" => self.lambda_affinity = num(key, value)?,
            "k_eig" => self.k_eig = num(key, value)?,
            "k_nn" => self.k_nn = num(key, value)?,
            "tau_fuse" | "tau" => self.tau_fuse = num(key, value)?,
            "n_dense_max" => self.n_dense_max = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "patch_rows" => self.patch_rows = num(key, value)?,
            "patch_cols" => self.patch_cols = num(key, value)?,
            "eigen_mode" => self.eigen_mode = value.parse()?,
            "dense_eigen_max" => self.dense_eigen_max = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown hyperparameter `{key}`"))),
        }
        Ok(())
    }

    /// Canonical `key=value` rendering, one per line, fixed key order.
    pub fn to_config_string(&self) -> String {
        format!(
            "lambda1={}\nlambda2={}\nlambda_affinity={}\nk_eig={}\nk_nn={}\ntau_fuse={}\n\
             n_dense_max={}\ntemperature={}\npatch_rows={}\npatch_cols={}\neigen_mode={}\n\
             dense_eigen_max={}\n",
            self.lambda1,
            self.lambda2,
            self.lambda_affinity,
            self.k_eig,
            self.k_nn,
            self.tau_fuse,
            self.n_dense_max,
            self.temperature,
            self.patch_rows,
            self.patch_cols,
            self.eigen_mode,
            self.dense_eigen_max
        )
    }
}

use serde::{Deserialize, Serialize};

use crate::clusterability::Region;
use crate::error::{Error, Result};
use crate::solution::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Linear,
}

/// Kernel width: fixed, or the per-feature median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaChoice {
    Median,
    Fixed(f64),
}

/// Ridge shift: fixed, or `n^{-1/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonChoice {
    Auto,
    Fixed(f64),
}

impl EpsilonChoice {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            EpsilonChoice::Auto => (n as f64).powf(-0.25),
            EpsilonChoice::Fixed(e) => e,
        }
    }
}

/// Hopkins probe count: fixed, or `⌈n/10⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopkinsProbes {
    Auto,
    Fixed(usize),
}

impl HopkinsProbes {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            HopkinsProbes::Auto => n.div_ceil(10).max(1),
            HopkinsProbes::Fixed(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub method: Method,
    pub kernel: KernelKind,
    pub kernel_gamma: GammaChoice,
    pub epsilon: EpsilonChoice,
    pub n_components: usize,
    pub basis_size: usize,
    pub hopkins_m: HopkinsProbes,
    pub hopkins_reps: usize,
    pub hopkins_region: Region,
    /// Use exponent 1 in the Hopkins ratio instead of the ambient dimension.
    pub hopkins_classical: bool,
    pub rng_seed: u64,
    pub standardize: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            method: Method::Kernel,
            kernel: KernelKind::Gaussian,
            kernel_gamma: GammaChoice::Median,
            epsilon: EpsilonChoice::Auto,
            n_components: 3,
            basis_size: 9,
            hopkins_m: HopkinsProbes::Auto,
            hopkins_reps: 100,
            hopkins_region: Region::BoundingBox,
            hopkins_classical: false,
            rng_seed: 0,
            standardize: false,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "method",
    "kernel",
    "kernel_gamma",
    "epsilon",
    "n_components",
    "basis_size",
    "hopkins_m",
    "hopkins_reps",
    "hopkins_region",
    "hopkins_classical",
    "rng_seed",
    "standardize",
];

fn invalid(key: &str, value: &str, reason: &str) -> Error {
    Error::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn positive_real(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(invalid(key, value, "expected a positive real number")),
    }
}

fn count(key: &str, value: &str, min: usize) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v >= min => Ok(v),
        _ => Err(invalid(
            key,
            value,
            &format!("expected an integer >= {min}"),
        )),
    }
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn unquote(raw: &str) -> &str {
    let v = raw.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

impl AnalysisConfig {
    /// Parses a flat `key = value` document. `#` starts a comment; values may
    /// be quoted. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid(
                    line,
                    "",
                    &format!("line {} is not of the form key = value", i + 1),
                )
            })?;
            cfg.set(key.trim(), unquote(value))?;
        }
        Ok(cfg)
    }

    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "method" => {
                self.method = match value {
                    "kernel" => Method::Kernel,
                    "functional" => Method::Functional,
                    _ => return Err(invalid(key, value, "expected kernel or functional")),
                }
            }
            "kernel" => {
                self.kernel = match value {
                    "gaussian" => KernelKind::Gaussian,
                    "linear" => KernelKind::Linear,
                    _ => return Err(invalid(key, value, "expected gaussian or linear")),
                }
            }
            "kernel_gamma" => {
                self.kernel_gamma = if value == "median" {
                    GammaChoice::Median
                } else {
                    GammaChoice::Fixed(positive_real(key, value)?)
                }
            }
            "epsilon" => {
                self.epsilon = if value == "auto" {
                    EpsilonChoice::Auto
                } else {
                    EpsilonChoice::Fixed(positive_real(key, value)?)
                }
            }
            "n_components" => self.n_components = count(key, value, 1)?,
            "basis_size" => {
                let b = count(key, value, 1)?;
                if b % 2 == 0 {
                    return Err(invalid(key, value, "basis size must be odd"));
                }
                self.basis_size = b;
            }
            "hopkins_m" => {
                self.hopkins_m = if value == "auto" {
                    HopkinsProbes::Auto
                } else {
                    HopkinsProbes::Fixed(count(key, value, 1)?)
                }
            }
            "hopkins_reps" => self.hopkins_reps = count(key, value, 1)?,
            "hopkins_region" => {
                self.hopkins_region = match value {
                    "box" => Region::BoundingBox,
                    "hull" => Region::ConvexHull,
                    _ => return Err(invalid(key, value, "expected box or hull")),
                }
            }
            "hopkins_classical" => self.hopkins_classical = boolean(key, value)?,
            "rng_seed" => {
                self.rng_seed = value
                    .parse()
                    .map_err(|_| invalid(key, value, "expected a non-negative integer"))?
            }
            "standardize" => self.standardize = boolean(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

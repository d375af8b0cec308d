//! Flat `key = value` run files.
//!
//! One assignment per line, `#` starts a comment. Keys are the model field
//! names (`mu0`, `sigma0`, `mu1`, `sigma1`, `lambda`, `alpha`, `strike_K`,
//! `s0`) plus `spot`, `rho0` and the simulation keys `seed`, `paths`, `dt`,
//! `tmax`.

use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub mu1: Option<f64>,
    pub sigma1: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub strike_k: Option<f64>,
    pub s0: Option<f64>,
    pub spot: Option<f64>,
    pub rho0: Option<f64>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.origin, self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text, &origin)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut out = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let fail = |message: String| ConfigError {
                origin: origin.to_string(),
                line: idx + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || -> Result<Option<f64>, ConfigError> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| fail(format!("`{key}`: `{value}` is not a finite number")))
            };
            match key {
                "mu0" => out.mu0 = float()?,
                "sigma0" => out.sigma0 = float()?,
                "mu1" => out.mu1 = float()?,
                "sigma1" => out.sigma1 = float()?,
                "lambda" => out.lambda = float()?,
                "alpha" => out.alpha = float()?,
                "strike_K" | "strike_k" => out.strike_k = float()?,
                "s0" => out.s0 = float()?,
                "spot" => out.spot = float()?,
                "rho0" => out.rho0 = float()?,
                "dt" => out.dt = float()?,
                "tmax" => out.tmax = float()?,
                "seed" => {
                    out.seed = Some(value.parse().map_err(|_| {
                        fail(format!("`seed`: `{value}` is not an unsigned integer"))
                    })?)
                }
                "paths" => {
                    out.paths = Some(value.parse().map_err(|_| {
                        fail(format!("`paths`: `{value}` is not an unsigned integer"))
                    })?)
                }
                _ => return Err(fail(format!("unknown key `{key}`"))),
            }
        }
        Ok(out)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: Settings) -> Settings {
        Settings {
            mu0: other.mu0.or(self.mu0),
            sigma0: other.sigma0.or(self.sigma0),
            mu1: other.mu1.or(self.mu1),
            sigma1: other.sigma1.or(self.sigma1),
            lambda: other.lambda.or(self.lambda),
            alpha: other.alpha.or(self.alpha),
            strike_k: other.strike_k.or(self.strike_k),
            s0: other.s0.or(self.s0),
            spot: other.spot.or(self.spot),
            rho0: other.rho0.or(self.rho0),
            seed: other.seed.or(self.seed),
            paths: other.paths.or(self.paths),
            dt: other.dt.or(self.dt),
            tmax: other.tmax.or(self.tmax),
        }
    }
}

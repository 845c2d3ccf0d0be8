//! System parameters and their key-value file format.
//!
//! Keys mirror the usual symbol names (`K`, `N`, `B`, `p_an`, ...). A file may
//! set any subset of keys; the rest come from [`SystemConfig::default`]. Any
//! key not listed here is rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which upper bound caps the optimized uplink rate `r_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateCapMode {
    /// Self-interference fully cancelled: `B log2(1 + p g_up / sigma2_an)`.
    #[default]
    Ideal,
    /// Residual self-interference kept in the denominator.
    SiLimited,
}

impl fmt::Display for RateCapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateCapMode::Ideal => "ideal",
            RateCapMode::SiLimited => "si-limited",
        })
    }
}

impl FromStr for RateCapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(RateCapMode::Ideal),
            "si-limited" => Ok(RateCapMode::SiLimited),
            other => Err(Error::InvalidConfig(format!(
                "unknown rate cap mode `{other}` (expected `ideal` or `si-limited`)"
            ))),
        }
    }
}

/// Every scalar of the simulated system plus per-vehicle task sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of vehicles.
    #[serde(rename = "K")]
    pub vehicles: usize,
    /// Antennas at the anchor node.
    #[serde(rename = "N")]
    pub antennas: usize,
    /// Bandwidth, Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Frame duration, s.
    #[serde(rename = "T")]
    pub frame: f64,
    /// CPU cycles per bit.
    #[serde(rename = "C")]
    pub cycles_per_bit: f64,
    /// Effective switched capacitance.
    pub kappa: f64,
    /// Fraction of offloaded bits returned on the downlink.
    pub alpha: f64,
    /// Power-splitting energy conversion ratio.
    pub beta: f64,
    /// Anchor-node transmit power, W.
    pub p_an: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Maximum vehicle CPU frequency, Hz.
    pub f_max: f64,
    pub sigma2_an: f64,
    pub sigma2_vn: f64,
    /// Power-splitting receiver noise. Stored, never used by the model.
    pub sigma2_ps: f64,
    /// Total task size per vehicle, bits.
    #[serde(rename = "M")]
    pub task_bits: Vec<f64>,
    pub rate_cap_mode: RateCapMode,
    pub seed: u64,
}

pub const DEFAULT_TASK_BITS: f64 = 5.0e5;

impl Default for SystemConfig {
    fn default() -> Self {
        let vehicles = 10;
        Self {
            vehicles,
            antennas: 8,
            bandwidth: 2.0e6,
            frame: 0.5,
            cycles_per_bit: 1.0e3,
            kappa: 1.0e-33,
            alpha: 0.8,
            beta: 0.2,
            p_an: 10.0,
            p_min: 1.0,
            p_max: 5.0,
            f_max: 1.0e12,
            sigma2_an: 1.0e-7,
            sigma2_vn: 1.0e-7,
            sigma2_ps: 1.0e-7,
            task_bits: vec![DEFAULT_TASK_BITS; vehicles],
            rate_cap_mode: RateCapMode::Ideal,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TaskBits {
    Uniform(f64),
    PerVehicle(Vec<f64>),
}

/// On-disk form: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(rename = "K")]
    vehicles: Option<usize>,
    #[serde(rename = "N")]
    antennas: Option<usize>,
    #[serde(rename = "B")]
    bandwidth: Option<f64>,
    #[serde(rename = "T")]
    frame: Option<f64>,
    #[serde(rename = "C")]
    cycles_per_bit: Option<f64>,
    kappa: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    p_an: Option<f64>,
    p_min: Option<f64>,
    p_max: Option<f64>,
    f_max: Option<f64>,
    sigma2_an: Option<f64>,
    sigma2_vn: Option<f64>,
    sigma2_ps: Option<f64>,
    #[serde(rename = "M")]
    task_bits: Option<TaskBits>,
    rate_cap_mode: Option<RateCapMode>,
    seed: Option<u64>,
}

impl ConfigFile {
    fn overlay(self, mut cfg: SystemConfig) -> Result<SystemConfig> {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        take!(
            vehicles, antennas, bandwidth, frame, cycles_per_bit, kappa, alpha, beta, p_an,
            p_min, p_max, f_max, sigma2_an, sigma2_vn, sigma2_ps, rate_cap_mode, seed
        );
        cfg.task_bits = match self.task_bits {
            Some(TaskBits::Uniform(m)) => vec![m; cfg.vehicles],
            Some(TaskBits::PerVehicle(list)) => {
                if list.len() != cfg.vehicles {
                    return Err(Error::InvalidConfig(format!(
                        "M lists {} task sizes but K = {}",
                        list.len(),
                        cfg.vehicles
                    )));
                }
                list
            }
            None => uniform_like(&cfg.task_bits, cfg.vehicles),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Uniform task list of length `k` using the mean of `bits` (or the default
/// size when `bits` is empty).
pub(crate) fn uniform_like(bits: &[f64], k: usize) -> Vec<f64> {
    let m = if bits.is_empty() {
        DEFAULT_TASK_BITS
    } else {
        bits.iter().sum::<f64>() / bits.len() as f64
    };
    vec![m; k]
}

impl SystemConfig {
    /// Parses a config document, filling unspecified keys from `base`.
    pub fn from_toml_str_over(text: &str, base: SystemConfig) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        file.overlay(base)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_over(text, SystemConfig::default())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Replaces the vehicle count and resizes `M` to a uniform list.
    pub fn with_vehicles(mut self, k: usize) -> Self {
        self.task_bits = uniform_like(&self.task_bits, k);
        self.vehicles = k;
        self
    }

    pub fn with_uniform_task(mut self, bits: f64) -> Self {
        self.task_bits = vec![bits; self.vehicles];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.vehicles == 0 {
            return fail("K must be at least 1".into());
        }
        if self.antennas == 0 {
            return fail("N must be at least 1".into());
        }
        if self.task_bits.len() != self.vehicles {
            return fail(format!(
                "M has {} entries but K = {}",
                self.task_bits.len(),
                self.vehicles
            ));
        }
        let positive = [
            ("B", self.bandwidth),
            ("T", self.frame),
            ("C", self.cycles_per_bit),
            ("kappa", self.kappa),
            ("p_min", self.p_min),
            ("f_max", self.f_max),
            ("sigma2_an", self.sigma2_an),
            ("sigma2_vn", self.sigma2_vn),
            ("sigma2_ps", self.sigma2_ps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.p_an.is_finite() && self.p_an >= 0.0) {
            return fail(format!("p_an must be non-negative, got {}", self.p_an));
        }
        if !(self.p_max.is_finite() && self.p_max >= self.p_min) {
            return fail(format!(
                "need p_min <= p_max, got {} > {}",
                self.p_min, self.p_max
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return fail(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if let Some((i, m)) = self
            .task_bits
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return fail(format!("M[{i}] must be positive, got {m}"));
        }
        Ok(())
    }
}

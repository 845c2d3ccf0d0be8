//! Closed-form link, compute and harvesting quantities.
//!
//! All functions are pure and work on one vehicle at a time. Gains are the
//! trace gains stored in [`ChannelSet`](crate::channel::ChannelSet).

use crate::config::{RateCapMode, SystemConfig};
use crate::error::{Error, Result};

/// Total power received at the anchor node while vehicle `i` transmits:
/// desired signal, self-interference and noise.
pub fn uplink_received_power(p: f64, g_up: f64, cfg: &SystemConfig, g_si: f64) -> f64 {
    p * g_up + cfg.p_an * g_si + cfg.sigma2_an
}

/// Uplink SINR with residual self-interference `p_an * g_si`.
pub fn uplink_sinr(p: f64, g_up: f64, cfg: &SystemConfig, g_si: f64) -> f64 {
    p * g_up / (cfg.p_an * g_si + cfg.sigma2_an)
}

/// Shannon rate `B log2(1 + sinr)`.
pub fn uplink_rate(sinr: f64, cfg: &SystemConfig) -> f64 {
    cfg.bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Rate with self-interference cancelled completely.
pub fn max_uplink_rate(p: f64, g_up: f64, cfg: &SystemConfig) -> f64 {
    uplink_rate(p * g_up / cfg.sigma2_an, cfg)
}

/// Effective SINR slope `d sinr / d p` under the configured cap mode.
pub(crate) fn cap_gain(g_up: f64, g_si: f64, cfg: &SystemConfig) -> f64 {
    match cfg.rate_cap_mode {
        RateCapMode::Ideal => g_up / cfg.sigma2_an,
        RateCapMode::SiLimited => g_up / (cfg.p_an * g_si + cfg.sigma2_an),
    }
}

/// Upper bound on the optimized rate `r_i` at power `p`.
pub fn rate_cap(p: f64, g_up: f64, g_si: f64, cfg: &SystemConfig) -> f64 {
    uplink_rate(p * cap_gain(g_up, g_si, cfg), cfg)
}

/// `d rate_cap / d p`.
pub(crate) fn rate_cap_slope(p: f64, g_up: f64, g_si: f64, cfg: &SystemConfig) -> f64 {
    let a = cap_gain(g_up, g_si, cfg);
    cfg.bandwidth / std::f64::consts::LN_2 * a / (1.0 + a * p)
}

/// Smallest power whose cap reaches `rate`.
pub fn power_for_rate(rate: f64, g_up: f64, g_si: f64, cfg: &SystemConfig) -> f64 {
    let a = cap_gain(g_up, g_si, cfg);
    (rate / cfg.bandwidth * std::f64::consts::LN_2).exp_m1() / a
}

/// Uplink slot length and transmit energy for `bits` at `rate` and power `p`.
pub fn uplink_time_energy(bits: f64, rate: f64, p: f64) -> Result<(f64, f64)> {
    if bits == 0.0 {
        return Ok((0.0, 0.0));
    }
    if rate <= 0.0 {
        return Err(Error::DegenerateAllocation { vehicle: 0, bits });
    }
    let tau = bits / rate;
    Ok((tau, p * tau))
}

/// Uniform CPU frequency that finishes the local bits exactly when the uplink
/// slot ends. Any lower frequency misses the deadline; any higher one burns
/// more energy.
pub fn optimal_cpu_frequency(
    task_bits: f64,
    offloaded: f64,
    tau_up: f64,
    cfg: &SystemConfig,
) -> Result<f64> {
    let f = frequency_unchecked(task_bits, offloaded, tau_up, cfg)?;
    if f > cfg.f_max {
        return Err(Error::FrequencyBound {
            required: f,
            f_max: cfg.f_max,
        });
    }
    Ok(f)
}

pub(crate) fn frequency_unchecked(
    task_bits: f64,
    offloaded: f64,
    tau_up: f64,
    cfg: &SystemConfig,
) -> Result<f64> {
    let local = (task_bits - offloaded).max(0.0);
    if local == 0.0 {
        return Ok(0.0);
    }
    if tau_up <= 0.0 {
        return Err(Error::InfeasibleLocalCompute {
            vehicle: 0,
            bits: local,
        });
    }
    Ok(cfg.cycles_per_bit * local / tau_up)
}

/// Local computing energy at the optimal frequency:
/// `kappa C^3 (M - m)^3 / tau_up^2`.
pub fn local_energy(task_bits: f64, offloaded: f64, tau_up: f64, cfg: &SystemConfig) -> Result<f64> {
    let f = optimal_cpu_frequency(task_bits, offloaded, tau_up, cfg)?;
    Ok(local_energy_at(task_bits - offloaded, f, cfg))
}

/// Energy of `local_bits` processed at uniform frequency `f`.
pub fn local_energy_at(local_bits: f64, f: f64, cfg: &SystemConfig) -> f64 {
    cfg.kappa * cfg.cycles_per_bit * local_bits.max(0.0) * f * f
}

/// Downlink SNR; `beta` scales the information branch as well.
pub fn downlink_snr(g_down: f64, cfg: &SystemConfig) -> f64 {
    cfg.beta * cfg.p_an * g_down / cfg.sigma2_vn
}

pub fn downlink_rate(g_down: f64, cfg: &SystemConfig) -> f64 {
    uplink_rate(downlink_snr(g_down, cfg), cfg)
}

/// Downlink rate and the slot needed to return `alpha * offloaded` bits.
pub fn downlink_rate_time(offloaded: f64, g_down: f64, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let rate = downlink_rate(g_down, cfg);
    let bits = cfg.alpha * offloaded;
    if bits == 0.0 {
        return Ok((rate, 0.0));
    }
    if rate <= 0.0 {
        return Err(Error::DegenerateDownlink { vehicle: 0, bits });
    }
    Ok((rate, bits / rate))
}

/// Energy harvested during a downlink slot of length `tau_down`.
pub fn harvested_energy(g_down: f64, tau_down: f64, cfg: &SystemConfig) -> f64 {
    cfg.beta * cfg.p_an * g_down * tau_down
}

/// Energy radiated by the anchor node during `tau_down`.
pub fn anchor_energy(tau_down: f64, cfg: &SystemConfig) -> f64 {
    cfg.p_an * tau_down
}

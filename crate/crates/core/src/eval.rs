//! Decision variables and the per-vehicle energy-efficiency report.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model;

/// Decision variables for all vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Average CPU frequency, Hz.
    pub f: Vec<f64>,
    /// Uplink transmit power, W.
    pub p: Vec<f64>,
    /// Offloaded bits.
    pub m: Vec<f64>,
    /// Uplink rate, bits/s.
    pub r: Vec<f64>,
}

impl Allocation {
    /// Allocation with zero frequencies; run
    /// [`eliminate_frequency`](crate::aiis::eliminate_frequency) to fill them.
    pub fn new(p: Vec<f64>, m: Vec<f64>, r: Vec<f64>) -> Self {
        let f = vec![0.0; p.len()];
        Self { f, p, m, r }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn check(&self, cfg: &SystemConfig) -> Result<()> {
        let k = cfg.vehicles;
        for (name, v) in [("f", &self.f), ("p", &self.p), ("m", &self.m), ("r", &self.r)] {
            if v.len() != k {
                return Err(Error::Dimension(format!(
                    "allocation field {name} has {} entries, K = {k}",
                    v.len()
                )));
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::Dimension(format!(
                    "allocation field {name} holds invalid value {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-vehicle times, energies and efficiencies plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tau_up: Vec<f64>,
    pub tau_down: Vec<f64>,
    pub tau_lo: Vec<f64>,
    pub e_vn: Vec<f64>,
    pub e_lo: Vec<f64>,
    pub e_eh: Vec<f64>,
    pub e_an: Vec<f64>,
    /// Allocated uplink rate `r_i`.
    pub rate_up: Vec<f64>,
    /// Cap on `r_i` under the configured rate-cap mode.
    pub rate_up_cap: Vec<f64>,
    pub rate_down: Vec<f64>,
    pub ee: Vec<f64>,
    pub avg_ee: f64,
    pub sum_tau_up: f64,
    /// Population variance of `ee` across vehicles.
    pub var_ee: f64,
    pub var_tau_up: f64,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn population_variance(v: &[f64]) -> f64 {
    let mu = mean(v);
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / v.len() as f64
}

fn check_channels(cfg: &SystemConfig, ch: &ChannelSet) -> Result<()> {
    if ch.vehicles() != cfg.vehicles {
        return Err(Error::Dimension(format!(
            "channel set covers {} vehicles, K = {}",
            ch.vehicles(),
            cfg.vehicles
        )));
    }
    Ok(())
}

/// Evaluates every per-vehicle quantity of `alloc`.
///
/// Local computation runs at the uniform frequency `alloc.f[i]`, so
/// `tau_lo = C (M - m) / f` and `e_lo = kappa C (M - m) f^2`.
pub fn evaluate(cfg: &SystemConfig, ch: &ChannelSet, alloc: &Allocation) -> Result<EvalReport> {
    alloc.check(cfg)?;
    check_channels(cfg, ch)?;
    let k = cfg.vehicles;
    let mut rep = EvalReport {
        tau_up: Vec::with_capacity(k),
        tau_down: Vec::with_capacity(k),
        tau_lo: Vec::with_capacity(k),
        e_vn: Vec::with_capacity(k),
        e_lo: Vec::with_capacity(k),
        e_eh: Vec::with_capacity(k),
        e_an: Vec::with_capacity(k),
        rate_up: alloc.r.clone(),
        rate_up_cap: Vec::with_capacity(k),
        rate_down: Vec::with_capacity(k),
        ee: Vec::with_capacity(k),
        avg_ee: 0.0,
        sum_tau_up: 0.0,
        var_ee: 0.0,
        var_tau_up: 0.0,
    };
    for i in 0..k {
        let (p, m, r, f) = (alloc.p[i], alloc.m[i], alloc.r[i], alloc.f[i]);
        let local = (cfg.task_bits[i] - m).max(0.0);
        let (tau_up, e_vn) = model::uplink_time_energy(m, r, p)
            .map_err(|_| Error::DegenerateAllocation { vehicle: i, bits: m })?;
        let (rate_down, tau_down) = model::downlink_rate_time(m, ch.g_down[i], cfg)
            .map_err(|_| Error::DegenerateDownlink { vehicle: i, bits: cfg.alpha * m })?;
        let tau_lo = if local == 0.0 {
            0.0
        } else if f > 0.0 {
            cfg.cycles_per_bit * local / f
        } else {
            return Err(Error::InfeasibleLocalCompute { vehicle: i, bits: local });
        };
        let e_lo = model::local_energy_at(local, f, cfg);
        let e_eh = model::harvested_energy(ch.g_down[i], tau_down, cfg);
        rep.tau_up.push(tau_up);
        rep.tau_down.push(tau_down);
        rep.tau_lo.push(tau_lo);
        rep.e_vn.push(e_vn);
        rep.e_lo.push(e_lo);
        rep.e_eh.push(e_eh);
        rep.e_an.push(model::anchor_energy(tau_down, cfg));
        rep.rate_up_cap.push(model::rate_cap(p, ch.g_up[i], ch.g_si, cfg));
        rep.rate_down.push(rate_down);
        rep.ee.push(r / (e_vn + e_lo));
    }
    rep.avg_ee = mean(&rep.ee);
    rep.sum_tau_up = rep.tau_up.iter().sum();
    rep.var_ee = population_variance(&rep.ee);
    rep.var_tau_up = population_variance(&rep.tau_up);
    Ok(rep)
}

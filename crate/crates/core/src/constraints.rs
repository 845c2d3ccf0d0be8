//! Labeled constraint residuals. A residual `<= 0` means satisfied.

use std::fmt;

use serde::Serialize;

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::eval::Allocation;
use crate::model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConstraintId {
    /// Vehicle energy covered by harvested energy.
    C1,
    /// Harvested energy bounded by radiated energy.
    C2,
    /// CPU frequency range.
    C3,
    /// Transmit power range.
    C4,
    /// Offloaded bits range.
    C5,
    /// Uplink rate range.
    C6,
    /// Local computing finishes within the uplink slot.
    C7,
    /// Previous vehicle's downlink slot fits in this vehicle's uplink slot.
    C8,
    /// Total uplink time within the frame.
    C9,
    /// Total downlink time within the frame.
    C10,
    /// Prefix uplink plus suffix downlink time within the frame.
    C11,
    /// All uplink slots plus the last downlink slot within the frame.
    NoOverlap,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    /// What the entry refers to, e.g. `"vehicle 3 upper"`.
    pub label: String,
    pub value: f64,
    /// Magnitude the tolerance is relative to.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintGroup {
    pub id: ConstraintId,
    pub residuals: Vec<Residual>,
}

/// Feasibility threshold: `max(abs_floor, rel * |scale|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs_floor: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs_floor.max(self.rel * scale.abs())
    }

    pub fn admits(&self, r: &Residual) -> bool {
        r.value <= self.threshold(r.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub groups: Vec<ConstraintGroup>,
    pub feasible: bool,
    pub tol: Tolerance,
}

impl ConstraintReport {
    pub fn group(&self, id: ConstraintId) -> Option<&ConstraintGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn group_satisfied(&self, id: ConstraintId) -> bool {
        self.group(id)
            .is_none_or(|g| g.residuals.iter().all(|r| self.tol.admits(r)))
    }

    /// Ids of every group with at least one violated entry.
    pub fn violated(&self) -> Vec<ConstraintId> {
        self.groups
            .iter()
            .filter(|g| !g.residuals.iter().all(|r| self.tol.admits(r)))
            .map(|g| g.id)
            .collect()
    }

    /// Largest residual normalized by its threshold scale.
    pub fn worst_scaled(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| &g.residuals)
            .map(|r| r.value / r.scale.abs().max(self.tol.abs_floor))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn safe_div(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Residuals of every constraint on `alloc`. Infeasibility is reported, not
/// raised; only shape mismatches are errors.
pub fn evaluate_constraints(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    alloc: &Allocation,
    tol: Tolerance,
) -> Result<ConstraintReport> {
    alloc.check(cfg)?;
    if ch.vehicles() != cfg.vehicles {
        return Err(Error::Dimension(format!(
            "channel set covers {} vehicles, K = {}",
            ch.vehicles(),
            cfg.vehicles
        )));
    }
    let k = cfg.vehicles;
    let t = cfg.frame;
    let mut tau_up = vec![0.0; k];
    let mut tau_down = vec![0.0; k];
    let mut tau_lo = vec![0.0; k];
    let mut e_tot = vec![0.0; k];
    let mut e_eh = vec![0.0; k];
    let mut e_an = vec![0.0; k];
    let mut cap = vec![0.0; k];
    for i in 0..k {
        let (p, m, r, f) = (alloc.p[i], alloc.m[i], alloc.r[i], alloc.f[i]);
        let local = (cfg.task_bits[i] - m).max(0.0);
        tau_up[i] = safe_div(m, r);
        let rd = model::downlink_rate(ch.g_down[i], cfg);
        tau_down[i] = safe_div(cfg.alpha * m, rd);
        tau_lo[i] = safe_div(cfg.cycles_per_bit * local, f);
        e_tot[i] = p * tau_up[i] + model::local_energy_at(local, f, cfg);
        e_eh[i] = model::harvested_energy(ch.g_down[i], tau_down[i], cfg);
        e_an[i] = model::anchor_energy(tau_down[i], cfg);
        cap[i] = model::rate_cap(p, ch.g_up[i], ch.g_si, cfg);
    }

    let per_vehicle = |id, f: &dyn Fn(usize) -> Vec<(String, f64, f64)>| ConstraintGroup {
        id,
        residuals: (0..k)
            .flat_map(|i| {
                f(i).into_iter().map(move |(what, value, scale)| Residual {
                    label: if what.is_empty() {
                        format!("vehicle {i}")
                    } else {
                        format!("vehicle {i} {what}")
                    },
                    value,
                    scale,
                })
            })
            .collect(),
    };
    let single = |id, label: &str, value: f64, scale: f64| ConstraintGroup {
        id,
        residuals: vec![Residual {
            label: label.to_string(),
            value,
            scale,
        }],
    };

    let mut groups = vec![
        per_vehicle(ConstraintId::C1, &|i| {
            vec![(String::new(), e_tot[i] - e_eh[i], e_tot[i].max(e_eh[i]))]
        }),
        per_vehicle(ConstraintId::C2, &|i| {
            vec![(String::new(), e_eh[i] - e_an[i], e_an[i].max(e_eh[i]))]
        }),
        per_vehicle(ConstraintId::C3, &|i| {
            vec![
                ("upper".into(), alloc.f[i] - cfg.f_max, cfg.f_max),
                ("lower".into(), -alloc.f[i], cfg.f_max),
            ]
        }),
        per_vehicle(ConstraintId::C4, &|i| {
            vec![
                ("lower".into(), cfg.p_min - alloc.p[i], cfg.p_max),
                ("upper".into(), alloc.p[i] - cfg.p_max, cfg.p_max),
            ]
        }),
        per_vehicle(ConstraintId::C5, &|i| {
            vec![
                ("lower".into(), -alloc.m[i], cfg.task_bits[i]),
                ("upper".into(), alloc.m[i] - cfg.task_bits[i], cfg.task_bits[i]),
            ]
        }),
        per_vehicle(ConstraintId::C6, &|i| {
            vec![
                ("lower".into(), -alloc.r[i], cap[i]),
                ("upper".into(), alloc.r[i] - cap[i], cap[i]),
            ]
        }),
        per_vehicle(ConstraintId::C7, &|i| {
            vec![
                ("deadline".into(), tau_lo[i] - tau_up[i], tau_up[i]),
                ("lower".into(), -tau_lo[i], tau_up[i]),
            ]
        }),
    ];
    groups.push(ConstraintGroup {
        id: ConstraintId::C8,
        residuals: (1..k)
            .map(|i| Residual {
                label: format!("vehicle {i}"),
                value: tau_down[i - 1] - tau_up[i],
                scale: tau_down[i - 1].max(tau_up[i]),
            })
            .collect(),
    });
    let sum_up: f64 = tau_up.iter().sum();
    let sum_down: f64 = tau_down.iter().sum();
    groups.push(single(ConstraintId::C9, "uplink total", sum_up - t, t));
    groups.push(single(ConstraintId::C10, "downlink total", sum_down - t, t));
    groups.push(ConstraintGroup {
        id: ConstraintId::C11,
        residuals: (0..k)
            .map(|split| {
                let up: f64 = tau_up[..=split].iter().sum();
                let down: f64 = tau_down[split..].iter().sum();
                Residual {
                    label: format!("K_tmp = {}", split + 1),
                    value: up + down - t,
                    scale: t,
                }
            })
            .collect(),
    });
    groups.push(single(
        ConstraintId::NoOverlap,
        "uplink total + last downlink",
        sum_up + tau_down[k - 1] - t,
        t,
    ));

    let feasible = groups
        .iter()
        .flat_map(|g| &g.residuals)
        .all(|r| tol.admits(r));
    Ok(ConstraintReport {
        groups,
        feasible,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig::default().with_vehicles(3).with_uniform_task(1e5);
        // beta * g_down < 1 keeps the harvest bound satisfiable.
        let ch = ChannelSet::from_gains(&[4.0, 4.5, 3.5], &[3.0, 3.5, 4.0], 6.0).unwrap();
        (cfg, ch)
    }

    #[test]
    fn zero_offload_has_zero_times() {
        let (cfg, ch) = setup();
        let mut alloc = Allocation::new(vec![2.0; 3], vec![0.0; 3], vec![1e7; 3]);
        alloc.f = vec![1e9; 3];
        let rep = evaluate_constraints(&cfg, &ch, &alloc, Tolerance::default()).unwrap();
        let c5 = rep.group(ConstraintId::C5).unwrap();
        assert!(c5.residuals.iter().filter(|r| r.label.ends_with("lower")).all(|r| r.value == 0.0));
        for id in [ConstraintId::C9, ConstraintId::C10, ConstraintId::C11] {
            assert!(rep.group_satisfied(id), "{id}");
            assert!(rep.group(id).unwrap().residuals.iter().all(|r| r.value <= 0.0));
        }
    }

    #[test]
    fn uplink_budget_boundary_is_zero() {
        let (cfg, ch) = setup();
        // tau_up = m / r = T / 3 per vehicle.
        let r = 3.0 * 5e4 / cfg.frame;
        let alloc = Allocation {
            f: vec![1e9; 3],
            p: vec![2.0; 3],
            m: vec![5e4; 3],
            r: vec![r; 3],
        };
        let rep = evaluate_constraints(&cfg, &ch, &alloc, Tolerance::default()).unwrap();
        let c9 = &rep.group(ConstraintId::C9).unwrap().residuals[0];
        assert!(c9.value.abs() < 1e-15, "{}", c9.value);
        assert!(rep.group_satisfied(ConstraintId::C9));
    }

    #[test]
    fn harvest_bound_tracks_channel_gain() {
        let cfg = SystemConfig::default().with_vehicles(1).with_uniform_task(1e5);
        let alloc = Allocation {
            f: vec![1e9],
            p: vec![2.0],
            m: vec![5e4],
            r: vec![1e7],
        };
        let weak = ChannelSet::from_gains(&[4.0], &[4.0], 6.0).unwrap();
        let strong = ChannelSet::from_gains(&[4.0], &[6.0], 6.0).unwrap();
        let tol = Tolerance::default();
        assert!(evaluate_constraints(&cfg, &weak, &alloc, tol).unwrap().group_satisfied(ConstraintId::C2));
        assert!(!evaluate_constraints(&cfg, &strong, &alloc, tol).unwrap().group_satisfied(ConstraintId::C2));
    }

    #[test]
    fn prefix_suffix_sums_are_indexed_correctly() {
        let (cfg, ch) = setup();
        let alloc = Allocation {
            f: vec![1e9; 3],
            p: vec![2.0; 3],
            m: vec![1e4, 2e4, 3e4],
            r: vec![1e6, 2e6, 4e6],
        };
        let rep = evaluate_constraints(&cfg, &ch, &alloc, Tolerance::default()).unwrap();
        let rd: Vec<f64> = ch.g_down.iter().map(|g| model::downlink_rate(*g, &cfg)).collect();
        let up = [1e-2, 1e-2, 7.5e-3];
        let down: Vec<f64> = (0..3).map(|i| 0.8 * alloc.m[i] / rd[i]).collect();
        let c11 = &rep.group(ConstraintId::C11).unwrap().residuals;
        assert_eq!(c11.len(), 3);
        let expect = [
            up[0] + down[0] + down[1] + down[2] - 0.5,
            up[0] + up[1] + down[1] + down[2] - 0.5,
            up[0] + up[1] + up[2] + down[2] - 0.5,
        ];
        for (res, e) in c11.iter().zip(expect) {
            assert!((res.value - e).abs() < 1e-15);
        }
        let c8 = &rep.group(ConstraintId::C8).unwrap().residuals;
        assert_eq!(c8.len(), 2);
        assert!((c8[0].value - (down[0] - up[1])).abs() < 1e-15);
    }

    #[test]
    fn tolerance_uses_scale_and_floor() {
        let tol = Tolerance::default();
        assert_eq!(tol.threshold(0.0), 1e-12);
        assert_eq!(tol.threshold(1e6), 1e-2);
    }
}

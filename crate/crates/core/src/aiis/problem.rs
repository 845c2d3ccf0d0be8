use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::eval::Allocation;
use crate::model;
use crate::nlp::NlpProblem;

/// One block of decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    /// Transmit powers.
    P,
    /// Offloaded bits.
    M,
    /// Uplink rates.
    R,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::P, Block::M, Block::R];

    pub fn letter(self) -> char {
        match self {
            Block::P => 'p',
            Block::M => 'm',
            Block::R => 'r',
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy)]
enum Con {
    /// Vehicle energy covered by harvested energy.
    Energy(usize),
    Frequency(usize),
    RateCap(usize),
    /// Downlink of vehicle `i - 1` inside the uplink of vehicle `i`.
    Pipeline(usize),
    UplinkSum,
    DownlinkSum,
    /// Uplinks `0..=k` plus downlinks `k..K`.
    PrefixSuffix(usize),
}

/// Block subproblem of the frequency-eliminated problem.
///
/// Free variables are scaled: powers in watts, offloaded bits as the
/// fraction `m / M`, rates relative to the cap at `p_max`. The objective is
/// the average energy efficiency divided by its value at the base
/// allocation. Constraints are written as ratios minus one so that every
/// residual is of order one.
///
/// Besides the constraints that belong to a block, each block also carries
/// the frequency cap whenever `m` or `r` is free and the rate cap whenever
/// `p` is free, so every accepted block keeps the whole allocation feasible.
/// The harvested-versus-radiated energy constraint does not depend on the
/// allocation and is left out.
pub struct P4Problem<'a> {
    cfg: &'a SystemConfig,
    ch: &'a ChannelSet,
    base: Allocation,
    free: Vec<Block>,
    k: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    r_ref: Vec<f64>,
    r_down: Vec<f64>,
    harvest: Vec<f64>,
    kc3: f64,
    ee_scale: f64,
    cons: Vec<Con>,
}

struct Vars {
    p: Vec<f64>,
    m: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> P4Problem<'a> {
    /// Problem over the blocks in `free` (duplicates ignored), all others
    /// fixed at `base`.
    pub fn new(
        cfg: &'a SystemConfig,
        ch: &'a ChannelSet,
        base: &Allocation,
        free: &[Block],
    ) -> Result<Self> {
        base.check(cfg)?;
        if ch.vehicles() != cfg.vehicles {
            return Err(Error::Dimension(format!(
                "channel set covers {} vehicles, K = {}",
                ch.vehicles(),
                cfg.vehicles
            )));
        }
        let k = cfg.vehicles;
        let mut blocks: Vec<Block> = Block::ALL
            .into_iter()
            .filter(|b| free.contains(b))
            .collect();
        if cfg.p_max <= cfg.p_min {
            blocks.retain(|b| *b != Block::P);
        }
        let (pf, mf, rf) = (
            blocks.contains(&Block::P),
            blocks.contains(&Block::M),
            blocks.contains(&Block::R),
        );

        let mut r_ref = Vec::with_capacity(k);
        let mut r_down = Vec::with_capacity(k);
        let mut harvest = Vec::with_capacity(k);
        for i in 0..k {
            let cap = model::rate_cap(cfg.p_max, ch.g_up[i], ch.g_si, cfg);
            if !(cap >= 1.0) {
                return Err(Error::DegenerateAllocation {
                    vehicle: i,
                    bits: cfg.task_bits[i],
                });
            }
            r_ref.push(cap);
            let rd = model::downlink_rate(ch.g_down[i], cfg);
            if cfg.alpha > 0.0 && !(rd > 0.0) {
                return Err(Error::DegenerateDownlink {
                    vehicle: i,
                    bits: cfg.alpha * cfg.task_bits[i],
                });
            }
            r_down.push(rd);
            harvest.push(cfg.beta * cfg.p_an * ch.g_down[i] * cfg.alpha);
        }

        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for b in &blocks {
            for i in 0..k {
                let (lo, hi) = match b {
                    Block::P => (cfg.p_min, cfg.p_max),
                    Block::M => (1.0 / cfg.task_bits[i], 1.0),
                    Block::R => {
                        let hi = if pf {
                            1.0
                        } else {
                            model::rate_cap(base.p[i], ch.g_up[i], ch.g_si, cfg) / r_ref[i]
                        };
                        (1.0 / r_ref[i], hi)
                    }
                };
                lower.push(lo);
                upper.push(hi);
            }
        }

        let mut cons = Vec::new();
        cons.extend((0..k).map(Con::Energy));
        if mf || rf {
            cons.extend(
                (0..k)
                    .filter(|&i| mf || base.m[i] < cfg.task_bits[i])
                    .map(Con::Frequency),
            );
        }
        if pf {
            cons.extend((0..k).map(Con::RateCap));
        }
        if mf || rf {
            if cfg.alpha > 0.0 {
                cons.extend((1..k).map(Con::Pipeline));
            }
            cons.push(Con::UplinkSum);
            cons.extend((0..k).map(Con::PrefixSuffix));
        }
        if mf && cfg.alpha > 0.0 {
            cons.push(Con::DownlinkSum);
        }

        let mut prob = Self {
            cfg,
            ch,
            base: base.clone(),
            free: blocks,
            k,
            lower,
            upper,
            r_ref,
            r_down,
            harvest,
            kc3: cfg.kappa * cfg.cycles_per_bit.powi(3),
            ee_scale: 1.0,
            cons,
        };
        let x0 = prob.encode(base);
        let raw = prob.objective(&x0);
        prob.ee_scale = if raw.is_finite() && raw > 0.0 { raw } else { 1.0 };
        Ok(prob)
    }

    pub fn free_blocks(&self) -> &[Block] {
        &self.free
    }

    /// Scale dividing the average energy efficiency in [`NlpProblem::objective`].
    pub fn objective_scale(&self) -> f64 {
        self.ee_scale
    }

    fn offset(&self, b: Block) -> Option<usize> {
        self.free.iter().position(|x| *x == b).map(|j| j * self.k)
    }

    /// Scaled coordinates of the free blocks of `alloc`.
    pub fn encode(&self, alloc: &Allocation) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.free.len() * self.k);
        for b in &self.free {
            for i in 0..self.k {
                x.push(match b {
                    Block::P => alloc.p[i],
                    Block::M => alloc.m[i] / self.cfg.task_bits[i],
                    Block::R => alloc.r[i] / self.r_ref[i],
                });
            }
        }
        x
    }

    /// Base allocation with the free blocks replaced by `x`. Frequencies are
    /// left untouched.
    pub fn decode(&self, x: &[f64]) -> Allocation {
        let v = self.vars(x);
        Allocation {
            f: self.base.f.clone(),
            p: v.p,
            m: v.m,
            r: v.r,
        }
    }

    fn vars(&self, x: &[f64]) -> Vars {
        let mut v = Vars {
            p: self.base.p.clone(),
            m: self.base.m.clone(),
            r: self.base.r.clone(),
        };
        for (j, b) in self.free.iter().enumerate() {
            let xs = &x[j * self.k..(j + 1) * self.k];
            for i in 0..self.k {
                match b {
                    Block::P => v.p[i] = xs[i],
                    Block::M => v.m[i] = xs[i] * self.cfg.task_bits[i],
                    Block::R => v.r[i] = xs[i] * self.r_ref[i],
                }
            }
        }
        v
    }

    /// Derivative of a raw variable with respect to its scaled coordinate.
    fn chain(&self, b: Block, i: usize) -> f64 {
        match b {
            Block::P => 1.0,
            Block::M => self.cfg.task_bits[i],
            Block::R => self.r_ref[i],
        }
    }

    fn put(&self, out: &mut [f64], b: Block, i: usize, d: f64) {
        if let Some(o) = self.offset(b) {
            out[o + i] += d * self.chain(b, i);
        }
    }

    /// Vehicle energy `p m / r + kappa C^3 (M - m)^3 r^2 / m^2`.
    fn energy(&self, p: f64, m: f64, r: f64, big_m: f64) -> f64 {
        let l = big_m - m;
        p * m / r + self.kc3 * l * l * l * r * r / (m * m)
    }

    fn uplink_sum(&self, v: &Vars, upto: usize) -> f64 {
        (0..upto).map(|i| v.m[i] / v.r[i]).sum()
    }

    fn downlink_time(&self, v: &Vars, i: usize) -> f64 {
        self.cfg.alpha * v.m[i] / self.r_down[i]
    }

    fn cap(&self, p: f64, i: usize) -> f64 {
        model::rate_cap(p, self.ch.g_up[i], self.ch.g_si, self.cfg)
    }

    fn con_value(&self, c: Con, v: &Vars) -> f64 {
        let cfg = self.cfg;
        let t = cfg.frame;
        match c {
            Con::Energy(i) => {
                if self.harvest[i] <= 0.0 {
                    return 1.0;
                }
                let (p, m, r) = (v.p[i], v.m[i], v.r[i]);
                let q = self.energy(p, m, r, cfg.task_bits[i]) / m;
                q * self.r_down[i] / self.harvest[i] - 1.0
            }
            Con::Frequency(i) => {
                let f = cfg.cycles_per_bit * (cfg.task_bits[i] - v.m[i]) * v.r[i] / v.m[i];
                f / cfg.f_max - 1.0
            }
            Con::RateCap(i) => v.r[i] / self.cap(v.p[i], i) - 1.0,
            Con::Pipeline(i) => {
                cfg.alpha * v.m[i - 1] * v.r[i] / (self.r_down[i - 1] * v.m[i]) - 1.0
            }
            Con::UplinkSum => self.uplink_sum(v, self.k) / t - 1.0,
            Con::DownlinkSum => (0..self.k).map(|i| self.downlink_time(v, i)).sum::<f64>() / t - 1.0,
            Con::PrefixSuffix(k) => {
                let down: f64 = (k..self.k).map(|j| self.downlink_time(v, j)).sum();
                (self.uplink_sum(v, k + 1) + down) / t - 1.0
            }
        }
    }

    fn con_gradient(&self, c: Con, v: &Vars, row: &mut [f64]) {
        let cfg = self.cfg;
        let t = cfg.frame;
        match c {
            Con::Energy(i) => {
                if self.harvest[i] <= 0.0 {
                    return;
                }
                let (p, m, r, big_m) = (v.p[i], v.m[i], v.r[i], cfg.task_bits[i]);
                let l = big_m - m;
                let s = self.r_down[i] / self.harvest[i];
                self.put(row, Block::P, i, s / r);
                let dm = -3.0 * self.kc3 * r * r * l * l * big_m / (m * m * m * m);
                self.put(row, Block::M, i, s * dm);
                let dr = -p / (r * r) + 2.0 * self.kc3 * l * l * l * r / (m * m * m);
                self.put(row, Block::R, i, s * dr);
            }
            Con::Frequency(i) => {
                let (m, r, big_m) = (v.m[i], v.r[i], cfg.task_bits[i]);
                let c = cfg.cycles_per_bit / cfg.f_max;
                self.put(row, Block::M, i, -c * r * big_m / (m * m));
                self.put(row, Block::R, i, c * (big_m - m) / m);
            }
            Con::RateCap(i) => {
                let cap = self.cap(v.p[i], i);
                let slope = model::rate_cap_slope(v.p[i], self.ch.g_up[i], self.ch.g_si, cfg);
                self.put(row, Block::R, i, 1.0 / cap);
                self.put(row, Block::P, i, -v.r[i] * slope / (cap * cap));
            }
            Con::Pipeline(i) => {
                let a = cfg.alpha / self.r_down[i - 1];
                let (mp, mi, ri) = (v.m[i - 1], v.m[i], v.r[i]);
                self.put(row, Block::M, i - 1, a * ri / mi);
                self.put(row, Block::M, i, -a * mp * ri / (mi * mi));
                self.put(row, Block::R, i, a * mp / mi);
            }
            Con::UplinkSum => self.uplink_sum_gradient(v, self.k, row),
            Con::DownlinkSum => {
                for i in 0..self.k {
                    self.put(row, Block::M, i, cfg.alpha / (self.r_down[i] * t));
                }
            }
            Con::PrefixSuffix(k) => {
                self.uplink_sum_gradient(v, k + 1, row);
                for j in k..self.k {
                    self.put(row, Block::M, j, cfg.alpha / (self.r_down[j] * t));
                }
            }
        }
    }

    fn uplink_sum_gradient(&self, v: &Vars, upto: usize, row: &mut [f64]) {
        let t = self.cfg.frame;
        for i in 0..upto {
            self.put(row, Block::M, i, 1.0 / (v.r[i] * t));
            self.put(row, Block::R, i, -v.m[i] / (v.r[i] * v.r[i] * t));
        }
    }
}

impl NlpProblem for P4Problem<'_> {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let v = self.vars(x);
        let total: f64 = (0..self.k)
            .map(|i| v.r[i] / self.energy(v.p[i], v.m[i], v.r[i], self.cfg.task_bits[i]))
            .sum();
        total / self.k as f64 / self.ee_scale
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let v = self.vars(x);
        for (o, c) in out.iter_mut().zip(&self.cons) {
            *o = self.con_value(*c, &v);
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let v = self.vars(x);
        out.fill(0.0);
        let w = 1.0 / (self.k as f64 * self.ee_scale);
        for i in 0..self.k {
            let (p, m, r, big_m) = (v.p[i], v.m[i], v.r[i], self.cfg.task_bits[i]);
            let l = big_m - m;
            let d = self.energy(p, m, r, big_m);
            let dd_dp = m / r;
            let dd_dm = p / r
                + self.kc3 * r * r * (-3.0 * l * l / (m * m) - 2.0 * l * l * l / (m * m * m));
            let dd_dr = -p * m / (r * r) + 2.0 * self.kc3 * l * l * l * r / (m * m);
            let s = w * r / (d * d);
            self.put(out, Block::P, i, -s * dd_dp);
            self.put(out, Block::M, i, -s * dd_dm);
            self.put(out, Block::R, i, w / d - s * dd_dr);
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let v = self.vars(x);
        let n = self.dim();
        out.fill(0.0);
        for (k, c) in self.cons.iter().enumerate() {
            self.con_gradient(*c, &v, &mut out[k * n..(k + 1) * n]);
        }
    }

    fn analytic_derivatives(&self) -> bool {
        true
    }
}

/// Order in which the blocks are visited within one alternation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BlockOrder(Vec<Block>);

impl BlockOrder {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let mut sorted = blocks.clone();
        sorted.sort();
        if sorted != Block::ALL {
            return Err(Error::InvalidConfig(format!(
                "block order must be a permutation of p, m, r, got {:?}",
                blocks
            )));
        }
        Ok(Self(blocks))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.0
    }
}

impl Default for BlockOrder {
    fn default() -> Self {
        Self(Block::ALL.to_vec())
    }
}

impl fmt::Display for BlockOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b}"))
    }
}

impl FromStr for BlockOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let blocks = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'p' => Ok(Block::P),
                'm' => Ok(Block::M),
                'r' => Ok(Block::R),
                other => Err(Error::InvalidConfig(format!(
                    "unknown block '{other}' in block order \"{s}\""
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }
}

impl TryFrom<String> for BlockOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BlockOrder> for String {
    fn from(o: BlockOrder) -> String {
        o.to_string()
    }
}

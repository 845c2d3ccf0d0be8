//! Reference schemes sharing channels and starting point with the optimizer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aiis::{self, AiisOptions, AiisRun, Block};
use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::constraints::evaluate_constraints;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Allocation, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Alternating optimization of all blocks.
    Aiis,
    /// Fixed variables: the repaired starting point, evaluated as is.
    Fvs,
    /// Full offloading with power and rate optimized.
    Fos,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Aiis, SchemeKind::Fvs, SchemeKind::Fos];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Aiis => "aiis",
            SchemeKind::Fvs => "fvs",
            SchemeKind::Fos => "fos",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aiis" => Ok(SchemeKind::Aiis),
            "fvs" => Ok(SchemeKind::Fvs),
            "fos" => Ok(SchemeKind::Fos),
            _ => Err(Error::InvalidConfig(format!(
                "unknown scheme \"{s}\" (expected aiis, fvs or fos)"
            ))),
        }
    }
}

/// Evaluates `init` after phase-I repair, without optimizing.
pub fn run_fvs(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    init: &Allocation,
    opts: &AiisOptions,
) -> Result<(Allocation, EvalReport)> {
    cfg.validate()?;
    let alloc = aiis::repair(cfg, ch, init, &Block::ALL, &opts.solver)?;
    let report = evaluate(cfg, ch, &alloc)?;
    Ok((alloc, report))
}

/// Pins `m = M` and alternates over powers and rates only.
pub fn run_fos(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    init: &Allocation,
    opts: &AiisOptions,
) -> Result<AiisRun> {
    cfg.validate()?;
    let shared = aiis::repair(cfg, ch, init, &Block::ALL, &opts.solver)?;
    let mut pinned = shared;
    pinned.m.clone_from(&cfg.task_bits);
    let free = [Block::P, Block::R];
    let start = aiis::repair(cfg, ch, &pinned, &free, &opts.solver)?;
    let blocks: Vec<Block> = opts
        .block_order
        .blocks()
        .iter()
        .copied()
        .filter(|b| *b != Block::M)
        .collect();
    aiis::alternate(cfg, ch, start, &blocks, opts)
}

/// Runs `scheme` from the shared starting point (`opts.initial_allocation`
/// or the default one). FVS reports zero alternations and an empty trace.
pub fn run_scheme(
    scheme: SchemeKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    opts: &AiisOptions,
) -> Result<AiisRun> {
    let init = match &opts.initial_allocation {
        Some(a) => a.clone(),
        None => aiis::default_initial_allocation(cfg, ch),
    };
    match scheme {
        SchemeKind::Aiis => {
            let opts = AiisOptions {
                initial_allocation: Some(init),
                ..opts.clone()
            };
            aiis::run_aiis(cfg, ch, &opts)
        }
        SchemeKind::Fos => run_fos(cfg, ch, &init, opts),
        SchemeKind::Fvs => {
            let (allocation, report) = run_fvs(cfg, ch, &init, opts)?;
            let constraints = evaluate_constraints(cfg, ch, &allocation, opts.tolerance)?;
            let feasible = constraints.feasible;
            Ok(AiisRun {
                trace: aiis::AiisTrace {
                    initial_objective: report.avg_ee,
                    alternations: Vec::new(),
                    objective_converged: true,
                    feasible,
                    converged: feasible,
                },
                allocation,
                report,
                constraints,
            })
        }
    }
}

//! Alternating interior-point optimization of powers, offloaded bits and
//! rates, with the CPU frequency eliminated in closed form.

mod problem;

use serde::{Deserialize, Serialize};

pub use problem::{Block, BlockOrder, P4Problem};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::constraints::{evaluate_constraints, ConstraintId, ConstraintReport, Tolerance};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Allocation, EvalReport};
use crate::model;
use crate::nlp::{self, NlpProblem, SolveStatus, SolverOptions};

/// How a block sees the other blocks within one alternation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Each block uses the freshest values of the others.
    #[default]
    GaussSeidel,
    /// Every block is solved against the previous alternation's values; the
    /// combined update is taken when it is feasible and improves the
    /// objective, otherwise the blocks are accepted one after another.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AiisOptions {
    /// Relative change of the average energy efficiency that ends the run.
    pub eps_converge: f64,
    pub max_alternations: usize,
    pub block_order: BlockOrder,
    pub update_rule: UpdateRule,
    /// Starting point; `None` uses [`default_initial_allocation`].
    pub initial_allocation: Option<Allocation>,
    pub solver: SolverOptions,
    pub tolerance: Tolerance,
}

impl Default for AiisOptions {
    fn default() -> Self {
        Self {
            eps_converge: 1e-6,
            max_alternations: 50,
            block_order: BlockOrder::default(),
            update_rule: UpdateRule::GaussSeidel,
            initial_allocation: None,
            solver: SolverOptions::default(),
            tolerance: Tolerance::default(),
        }
    }
}

impl AiisOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_converge > 0.0) {
            return Err(Error::InvalidConfig("eps_converge must be positive".into()));
        }
        if self.max_alternations == 0 {
            return Err(Error::InvalidConfig("max_alternations must be at least 1".into()));
        }
        self.solver.validate().map_err(Error::InvalidConfig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockStep {
    pub block: Block,
    /// False when the solve would have lowered the objective and the
    /// previous values were kept.
    pub accepted: bool,
    /// Average energy efficiency after the step.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alternation {
    pub objective: f64,
    pub steps: Vec<BlockStep>,
    /// Worst scaled residual over the constraints the optimizer controls.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiisTrace {
    /// Average energy efficiency of the (repaired) starting point.
    pub initial_objective: f64,
    pub alternations: Vec<Alternation>,
    /// Objective settled below the threshold before the alternation cap.
    pub objective_converged: bool,
    /// The final allocation passes every constraint check.
    pub feasible: bool,
    /// `objective_converged && feasible`.
    pub converged: bool,
}

impl AiisTrace {
    /// Initial objective followed by the objective after each alternation.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.alternations.iter().map(|a| a.objective))
            .collect()
    }

    pub fn alternation_count(&self) -> usize {
        self.alternations.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiisRun {
    pub allocation: Allocation,
    pub trace: AiisTrace,
    pub report: EvalReport,
    pub constraints: ConstraintReport,
}

/// Sets every `f_i` to the uniform frequency that finishes the local bits
/// exactly at the end of the uplink slot.
///
/// No upper frequency bound is applied here; the constraint check reports it.
pub fn eliminate_frequency(cfg: &SystemConfig, alloc: &Allocation) -> Result<Allocation> {
    alloc.check(cfg)?;
    let mut out = alloc.clone();
    for i in 0..cfg.vehicles {
        let local = cfg.task_bits[i] - alloc.m[i];
        out.f[i] = if local <= 0.0 {
            0.0
        } else if alloc.m[i] > 0.0 && alloc.r[i] > 0.0 {
            cfg.cycles_per_bit * local * alloc.r[i] / alloc.m[i]
        } else {
            return Err(Error::InfeasibleLocalCompute {
                vehicle: i,
                bits: local,
            });
        };
    }
    Ok(out)
}

/// Midpoint power, half the task offloaded, half the rate cap.
pub fn default_initial_allocation(cfg: &SystemConfig, ch: &ChannelSet) -> Allocation {
    let k = cfg.vehicles;
    let p0 = 0.5 * (cfg.p_min + cfg.p_max);
    let p = vec![p0; k];
    let m = cfg.task_bits.iter().map(|b| 0.5 * b).collect();
    let r = (0..k)
        .map(|i| 0.5 * model::rate_cap(p0, ch.g_up[i], ch.g_si, cfg))
        .collect();
    Allocation::new(p, m, r)
}

/// Moves `alloc` into the strict interior of the constraints over the
/// blocks in `free`, then eliminates the frequency. An interior allocation
/// comes back with only its frequencies updated.
pub fn repair(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    alloc: &Allocation,
    free: &[Block],
    opts: &SolverOptions,
) -> Result<Allocation> {
    let prob = P4Problem::new(cfg, ch, alloc, free)?;
    let x = nlp::find_interior_point(&prob, &prob.encode(alloc), opts)?;
    eliminate_frequency(cfg, &prob.decode(&x))
}

fn average_ee(cfg: &SystemConfig, ch: &ChannelSet, alloc: &Allocation) -> Result<f64> {
    Ok(evaluate(cfg, ch, alloc)?.avg_ee)
}

/// Result of one safeguarded block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub allocation: Allocation,
    pub accepted: bool,
    pub status: SolveStatus,
    pub objective: f64,
}

/// Maximizes the average energy efficiency over one block with the others
/// fixed. A result worse than `alloc` is discarded.
pub fn solve_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    alloc: &Allocation,
    block: Block,
    opts: &SolverOptions,
) -> Result<BlockOutcome> {
    let before = eliminate_frequency(cfg, alloc)?;
    let prev = average_ee(cfg, ch, &before)?;
    let prob = P4Problem::new(cfg, ch, &before, &[block])?;
    if prob.dim() == 0 {
        return Ok(BlockOutcome {
            allocation: before,
            accepted: true,
            status: SolveStatus::Converged,
            objective: prev,
        });
    }
    let sol = nlp::solve(&prob, &prob.encode(&before), opts);
    if sol.status == SolveStatus::InfeasibleStart {
        let mut g = vec![0.0; prob.num_constraints()];
        prob.constraints(&sol.x, &mut g);
        return Err(Error::InfeasibleStart {
            max_violation: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let cand = eliminate_frequency(cfg, &prob.decode(&sol.x))?;
    let value = average_ee(cfg, ch, &cand)?;
    Ok(if value >= prev {
        BlockOutcome {
            allocation: cand,
            accepted: true,
            status: sol.status,
            objective: value,
        }
    } else {
        BlockOutcome {
            allocation: before,
            accepted: false,
            status: sol.status,
            objective: prev,
        }
    })
}

pub fn solve_block_p(cfg: &SystemConfig, ch: &ChannelSet, alloc: &Allocation) -> Result<Allocation> {
    Ok(solve_block(cfg, ch, alloc, Block::P, &SolverOptions::default())?.allocation)
}

pub fn solve_block_m(cfg: &SystemConfig, ch: &ChannelSet, alloc: &Allocation) -> Result<Allocation> {
    Ok(solve_block(cfg, ch, alloc, Block::M, &SolverOptions::default())?.allocation)
}

pub fn solve_block_r(cfg: &SystemConfig, ch: &ChannelSet, alloc: &Allocation) -> Result<Allocation> {
    Ok(solve_block(cfg, ch, alloc, Block::R, &SolverOptions::default())?.allocation)
}

/// Worst scaled residual ignoring the harvested-versus-radiated energy
/// check, which no allocation can influence.
pub(crate) fn controllable_residual(report: &ConstraintReport) -> f64 {
    report
        .groups
        .iter()
        .filter(|g| g.id != ConstraintId::C2)
        .flat_map(|g| &g.residuals)
        .map(|r| r.value / r.scale.abs().max(report.tol.abs_floor))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn combined_candidate(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    prev: &Allocation,
    parts: &[(Block, Allocation)],
) -> Result<Option<Allocation>> {
    let mut cand = prev.clone();
    for (b, a) in parts {
        match b {
            Block::P => cand.p.clone_from(&a.p),
            Block::M => cand.m.clone_from(&a.m),
            Block::R => cand.r.clone_from(&a.r),
        }
    }
    let blocks: Vec<Block> = parts.iter().map(|(b, _)| *b).collect();
    let prob = P4Problem::new(cfg, ch, &cand, &blocks)?;
    if !nlp::is_strictly_interior(&prob, &prob.encode(&cand)) {
        return Ok(None);
    }
    Ok(Some(eliminate_frequency(cfg, &cand)?))
}

/// Alternates block solves over `blocks` starting from `start`, which must
/// already be strictly feasible.
pub(crate) fn alternate(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    start: Allocation,
    blocks: &[Block],
    opts: &AiisOptions,
) -> Result<AiisRun> {
    let mut alloc = eliminate_frequency(cfg, &start)?;
    let initial_objective = average_ee(cfg, ch, &alloc)?;
    let mut prev = initial_objective;
    let mut alternations = Vec::new();
    let mut objective_converged = false;

    for _ in 0..opts.max_alternations {
        let mut steps = Vec::with_capacity(blocks.len());
        let mut jacobi_done = false;
        if opts.update_rule == UpdateRule::Jacobi && blocks.len() > 1 {
            let mut parts = Vec::with_capacity(blocks.len());
            for &b in blocks {
                let out = solve_block(cfg, ch, &alloc, b, &opts.solver)?;
                parts.push((b, out));
            }
            let updates: Vec<(Block, Allocation)> = parts
                .iter()
                .filter(|(_, o)| o.accepted)
                .map(|(b, o)| (*b, o.allocation.clone()))
                .collect();
            if let Some(cand) = combined_candidate(cfg, ch, &alloc, &updates)? {
                let value = average_ee(cfg, ch, &cand)?;
                if value >= prev {
                    for (b, o) in &parts {
                        steps.push(BlockStep {
                            block: *b,
                            accepted: o.accepted,
                            objective: value,
                        });
                    }
                    alloc = cand;
                    jacobi_done = true;
                }
            }
        }
        if !jacobi_done {
            for &b in blocks {
                let out = solve_block(cfg, ch, &alloc, b, &opts.solver)?;
                steps.push(BlockStep {
                    block: b,
                    accepted: out.accepted,
                    objective: out.objective,
                });
                alloc = out.allocation;
            }
        }
        let value = average_ee(cfg, ch, &alloc)?;
        let report = evaluate_constraints(cfg, ch, &alloc, opts.tolerance)?;
        alternations.push(Alternation {
            objective: value,
            steps,
            max_residual: controllable_residual(&report),
        });
        let change = (value - prev).abs() / value.abs().max(1.0);
        prev = value;
        if change < opts.eps_converge {
            objective_converged = true;
            break;
        }
    }

    let report = evaluate(cfg, ch, &alloc)?;
    let constraints = evaluate_constraints(cfg, ch, &alloc, opts.tolerance)?;
    let feasible = constraints.feasible;
    Ok(AiisRun {
        allocation: alloc,
        trace: AiisTrace {
            initial_objective,
            alternations,
            objective_converged,
            feasible,
            converged: objective_converged && feasible,
        },
        report,
        constraints,
    })
}

/// Runs the alternating scheme from the repaired initial allocation.
pub fn run_aiis(cfg: &SystemConfig, ch: &ChannelSet, opts: &AiisOptions) -> Result<AiisRun> {
    cfg.validate()?;
    opts.validate()?;
    let init = match &opts.initial_allocation {
        Some(a) => a.clone(),
        None => default_initial_allocation(cfg, ch),
    };
    let start = repair(cfg, ch, &init, &Block::ALL, &opts.solver)?;
    alternate(cfg, ch, start, opts.block_order.blocks(), opts)
}

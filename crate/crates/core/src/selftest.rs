//! Analytic checks of the barrier solver and of the block-problem derivatives.

use rand::Rng;
use serde::Serialize;

use crate::aiis::{self, Block, P4Problem};
use crate::channel::{generate_channels, trial_rng};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::eval::Allocation;
use crate::model;
use crate::nlp::{
    check_gradient, find_interior_point, solve, FnProblem, NlpProblem, SolveStatus, SolverOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestCase {
    pub name: &'static str,
    pub detail: String,
    pub passed: bool,
}

fn case(name: &'static str, passed: bool, detail: String) -> SelfTestCase {
    SelfTestCase {
        name,
        detail,
        passed,
    }
}

/// Maximize `-(x - 3)^2` on `[0, 2]`.
pub fn box_quadratic() -> FnProblem {
    FnProblem::new(1, |x| -(x[0] - 3.0).powi(2))
        .with_gradient(|x| vec![-2.0 * (x[0] - 3.0)])
        .with_bounds(vec![0.0], vec![2.0])
}

/// Maximize `x + y` on the unit disc.
pub fn disc_linear() -> FnProblem {
    FnProblem::new(2, |x| x[0] + x[1])
        .with_gradient(|_| vec![1.0, 1.0])
        .constraint_with_gradient(
            |x| x[0] * x[0] + x[1] * x[1] - 1.0,
            |x| vec![2.0 * x[0], 2.0 * x[1]],
        )
}

/// Maximize `-|x|^2` on `[-1, 1]^d`.
pub fn centered_bowl(d: usize) -> FnProblem {
    FnProblem::new(d, |x| -x.iter().map(|v| v * v).sum::<f64>())
        .with_gradient(|x| x.iter().map(|v| -2.0 * v).collect())
        .with_bounds(vec![-1.0; d], vec![1.0; d])
}

/// Runs the analytic battery with `opts`.
pub fn solver_battery(opts: &SolverOptions) -> Vec<SelfTestCase> {
    let mut out = Vec::new();

    let p = box_quadratic();
    let s = solve(&p, &[1.0], opts);
    let err = (s.x[0] - 2.0).abs();
    out.push(case(
        "box-quadratic",
        err <= 1e-6 && s.status == SolveStatus::Converged,
        format!("x* = {:.9} (expected 2, error {err:.2e})", s.x[0]),
    ));

    let p = disc_linear();
    let s = solve(&p, &[0.0, 0.0], opts);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let err = (s.x[0] - h).abs().max((s.x[1] - h).abs());
    out.push(case(
        "disc-linear",
        err <= 1e-4 && s.status == SolveStatus::Converged,
        format!("x* = ({:.6}, {:.6}) (error {err:.2e})", s.x[0], s.x[1]),
    ));

    let p = centered_bowl(4);
    let s = solve(&p, &[0.5, -0.3, 0.9, -0.7], opts);
    let err = s.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    out.push(case(
        "centered-bowl",
        err <= 1e-6 && s.status == SolveStatus::Converged,
        format!("max |x_j| = {err:.2e}"),
    ));

    let p = FnProblem::new(1, |x| x[0])
        .with_bounds(vec![0.0], vec![2.0])
        .constraint(|x| x[0] - 1.0);
    let res = find_interior_point(&p, &[1.7], opts);
    let ok = matches!(&res, Ok(x) if x[0] > 0.0 && x[0] < 1.0);
    out.push(case(
        "phase-one",
        ok,
        format!("hint 1.7 -> {:?}", res.as_ref().map(|x| x[0]).map_err(|e| e.to_string())),
    ));

    let p = FnProblem::new(1, |x| x[0])
        .with_bounds(vec![-2.0], vec![2.0])
        .constraint(|x| x[0] + 1.0)
        .constraint(|x| 1.0 - x[0]);
    let res = find_interior_point(&p, &[0.0], opts);
    out.push(case(
        "phase-one-empty",
        res.is_err(),
        match res {
            Ok(x) => format!("unexpected point {x:?}"),
            Err(e) => format!("rejected: {e}"),
        },
    ));

    let lin = FnProblem::new(3, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2] + 1.0)
        .with_gradient(|_| vec![2.0, -3.0, 0.5]);
    let err = check_gradient(&lin, &[0.3, -1.2, 4.0]);
    out.push(case(
        "gradcheck-linear",
        err <= 1e-10,
        format!("max relative error {err:.2e}"),
    ));

    let quad = FnProblem::new(2, |x| 3.0 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1])
        .with_gradient(|x| vec![6.0 * x[0] - x[1], -x[0] + x[1]]);
    let err = check_gradient(&quad, &[1.5, -2.5]);
    out.push(case(
        "gradcheck-quadratic",
        err <= 1e-7,
        format!("max relative error {err:.2e}"),
    ));

    out
}

/// Worst gradient-check error of each block problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockGradcheck {
    pub block: Block,
    pub points: usize,
    pub max_error: f64,
}

/// Checks the analytic derivatives of the three block problems at `points`
/// random interior allocations drawn from `seed`.
pub fn gradcheck_blocks(cfg: &SystemConfig, points: usize, seed: u64) -> Result<Vec<BlockGradcheck>> {
    cfg.validate()?;
    let opts = SolverOptions::default();
    let mut worst = [0.0f64; 3];
    let mut used = 0;
    let mut draw = 0u64;
    while used < points {
        if draw > 10 * points as u64 + 10 {
            break;
        }
        let trial = draw;
        draw += 1;
        let ch = generate_channels(cfg, trial)?;
        let mut rng = trial_rng(seed ^ 0x9e37_79b9_7f4a_7c15, trial);
        let k = cfg.vehicles;
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(cfg.p_min..=cfg.p_max)).collect();
        let m: Vec<f64> = (0..k)
            .map(|i| rng.random_range(0.2..0.8) * cfg.task_bits[i])
            .collect();
        let r: Vec<f64> = (0..k)
            .map(|i| rng.random_range(0.2..0.8) * model::rate_cap(p[i], ch.g_up[i], ch.g_si, cfg))
            .collect();
        let Ok(alloc) = aiis::repair(cfg, &ch, &Allocation::new(p, m, r), &Block::ALL, &opts) else {
            continue;
        };
        for (j, b) in Block::ALL.into_iter().enumerate() {
            let prob = P4Problem::new(cfg, &ch, &alloc, &[b])?;
            if prob.dim() > 0 {
                worst[j] = worst[j].max(check_gradient(&prob, &prob.encode(&alloc)));
            }
        }
        used += 1;
    }
    Ok(Block::ALL
        .into_iter()
        .zip(worst)
        .map(|(block, max_error)| BlockGradcheck {
            block,
            points: used,
            max_error,
        })
        .collect())
}

/// The analytic battery plus block gradient checks at 100 points of `cfg`.
pub fn full_battery(cfg: &SystemConfig) -> Result<Vec<SelfTestCase>> {
    let mut cases = solver_battery(&SolverOptions::default());
    for g in gradcheck_blocks(cfg, 100, cfg.seed)? {
        cases.push(case(
            match g.block {
                Block::P => "gradcheck-block-p",
                Block::M => "gradcheck-block-m",
                Block::R => "gradcheck-block-r",
            },
            g.points == 100 && g.max_error <= 1e-5,
            format!("max relative error {:.2e} over {} points", g.max_error, g.points),
        ));
    }
    Ok(cases)
}

use proptest::prelude::*;

use swipt_mec::aiis::{
    eliminate_frequency, run_aiis, solve_block, solve_block_m, solve_block_p, solve_block_r, AiisOptions,
    Block, BlockOrder, UpdateRule,
};
use swipt_mec::channel::{generate_channels, ChannelSet};
use swipt_mec::config::{RateCapMode, SystemConfig};
use swipt_mec::constraints::{evaluate_constraints, ConstraintId, Tolerance};
use swipt_mec::eval::{evaluate, Allocation};
use swipt_mec::model::{power_for_rate, rate_cap};
use swipt_mec::nlp::SolverOptions;

const G_UP: f64 = 1e-6;
const G_DOWN: f64 = 1e3;

fn single(kappa: f64, bits: f64) -> (SystemConfig, ChannelSet) {
    let cfg = SystemConfig {
        kappa,
        ..SystemConfig::default().with_vehicles(1).with_uniform_task(bits)
    };
    let ch = ChannelSet::from_gains(&[G_UP], &[G_DOWN], 1e-9).unwrap();
    (cfg, ch)
}

/// Every group except the channel-only harvesting check holds.
fn controllable_ok(cfg: &SystemConfig, ch: &ChannelSet, a: &Allocation) -> bool {
    evaluate_constraints(cfg, ch, a, Tolerance::default())
        .unwrap()
        .violated()
        .iter()
        .all(|id| *id == ConstraintId::C2)
}

fn ee(cfg: &SystemConfig, ch: &ChannelSet, a: &Allocation) -> f64 {
    evaluate(cfg, ch, a).unwrap().avg_ee
}

fn alloc1(cfg: &SystemConfig, p: f64, m: f64, r: f64) -> Allocation {
    eliminate_frequency(cfg, &Allocation::new(vec![p], vec![m], vec![r])).unwrap()
}

#[test]
fn eliminated_frequency_finishes_exactly_with_the_uplink() {
    let cfg = SystemConfig::default().with_vehicles(2).with_uniform_task(1e5);
    let a = eliminate_frequency(&cfg, &Allocation::new(vec![2.0, 3.0], vec![4e4, 1e5], vec![1e7, 2e7])).unwrap();
    // C (M - m) r / m
    assert!((a.f[0] - 1e3 * 6e4 * 1e7 / 4e4).abs() <= 1e-3);
    assert_eq!(a.f[1], 0.0);
    assert!(eliminate_frequency(&cfg, &Allocation::new(vec![2.0, 3.0], vec![0.0, 1e5], vec![1e7, 2e7])).is_err());
}

#[test]
fn power_block_drops_to_the_cheapest_feasible_power() {
    let (cfg, ch) = single(1e-33, 5e5);
    // Rate well below the cap at p_min: the floor of the power box.
    let r = 0.5 * rate_cap(cfg.p_min, G_UP, 1e-9, &cfg);
    let out = solve_block_p(&cfg, &ch, &alloc1(&cfg, 3.0, 2.5e5, r)).unwrap();
    assert!((out.p[0] - cfg.p_min).abs() <= 1e-6, "p = {}", out.p[0]);
    // Rate that needs more than p_min: the cap binds.
    let r = 0.9 * rate_cap(4.0, G_UP, 1e-9, &cfg);
    let need = power_for_rate(r, G_UP, 1e-9, &cfg);
    let out = solve_block_p(&cfg, &ch, &alloc1(&cfg, 4.5, 2.5e5, r)).unwrap();
    assert!((out.p[0] - need).abs() <= 1e-5 * need, "p = {} vs {need}", out.p[0]);
}

#[test]
fn power_block_matches_fine_grid_with_self_interference() {
    let (mut cfg, _) = single(1e-30, 5e5);
    cfg.rate_cap_mode = RateCapMode::SiLimited;
    let ch = ChannelSet::from_gains(&[G_UP], &[G_DOWN], 5e-9).unwrap();
    let r = 0.8 * rate_cap(3.5, G_UP, 5e-9, &cfg);
    let start = alloc1(&cfg, 4.0, 2.5e5, r);
    let out = solve_block_p(&cfg, &ch, &start).unwrap();
    let mut best = f64::NEG_INFINITY;
    let steps = ((cfg.p_max - cfg.p_min) / 1e-3).round() as usize;
    for j in 0..=steps {
        let p = cfg.p_min + j as f64 * 1e-3;
        let a = alloc1(&cfg, p, 2.5e5, r);
        if controllable_ok(&cfg, &ch, &a) {
            best = best.max(ee(&cfg, &ch, &a));
        }
    }
    let got = ee(&cfg, &ch, &out);
    assert!(controllable_ok(&cfg, &ch, &out));
    // The grid can miss the optimum by one step's worth of slope.
    assert!(got >= best * (1.0 - 1e-9), "{got} < grid {best}");
    assert!(got <= best * (1.0 + 1e-3), "{got} far above grid {best}");
}

#[test]
fn negligible_local_cost_sends_offloading_to_its_floor() {
    let (cfg, ch) = single(1e-45, 5e5);
    let r = 0.5 * rate_cap(3.0, G_UP, 1e-9, &cfg);
    let out = solve_block_m(&cfg, &ch, &alloc1(&cfg, 3.0, 2.5e5, r)).unwrap();
    let big_m = cfg.task_bits[0];
    let c_r = cfg.cycles_per_bit * r;
    // Smallest m keeping the eliminated frequency within f_max.
    let floor = (big_m * c_r / (cfg.f_max + c_r)).max(1.0);
    assert!((out.m[0] - floor).abs() <= 1e-3 * floor, "m = {} floor {floor}", out.m[0]);
}

#[test]
fn offloading_block_matches_one_bit_grid() {
    let (cfg, ch) = single(1e-28, 1e4);
    let r = 0.5 * rate_cap(3.0, G_UP, 1e-9, &cfg);
    let out = solve_block_m(&cfg, &ch, &alloc1(&cfg, 3.0, 5e3, r)).unwrap();
    let mut best = f64::NEG_INFINITY;
    for m in 1..=10_000u32 {
        let a = alloc1(&cfg, 3.0, m as f64, r);
        if a.m[0] < cfg.task_bits[0] && controllable_ok(&cfg, &ch, &a) {
            best = best.max(ee(&cfg, &ch, &a));
        }
    }
    let got = ee(&cfg, &ch, &out);
    assert!(controllable_ok(&cfg, &ch, &out));
    assert!((got - best).abs() <= 1e-4 * best, "{got} vs grid {best}");
}

#[test]
fn rate_block_hits_the_stationary_point() {
    let (cfg, ch) = single(1e-28, 5e5);
    let (p, m) = (3.0, 2.5e5);
    let big_m = cfg.task_bits[0];
    // ee = r^2 / (a + b r^3), maximized at r = (2a/b)^(1/3).
    let a = p * m;
    let b = cfg.kappa * cfg.cycles_per_bit.powi(3) * (big_m - m).powi(3) / (m * m);
    let r_star = (2.0 * a / b).cbrt();
    let cap = rate_cap(p, G_UP, 1e-9, &cfg);
    assert!(r_star < 0.9 * cap);
    let start = alloc1(&cfg, p, m, 0.5 * cap);
    assert!(controllable_ok(&cfg, &ch, &start));
    let out = solve_block_r(&cfg, &ch, &start).unwrap();
    assert!((out.r[0] - r_star).abs() <= 1e-4 * r_star, "r = {} vs {r_star}", out.r[0]);
}

#[test]
fn rate_block_stays_at_cap_when_cap_binds() {
    let (cfg, ch) = single(1e-33, 5e5);
    let cap = rate_cap(3.0, G_UP, 1e-9, &cfg);
    let out = solve_block_r(&cfg, &ch, &alloc1(&cfg, 3.0, 2.5e5, 0.6 * cap)).unwrap();
    assert!(out.r[0] >= cap * (1.0 - 1e-5) && out.r[0] <= cap);
    let again = solve_block_r(&cfg, &ch, &out).unwrap();
    assert!((again.r[0] - out.r[0]).abs() <= 1e-6 * cap);
}

#[test]
fn identical_vehicles_get_identical_allocations() {
    let cfg = SystemConfig::default().with_vehicles(3).with_uniform_task(1e5);
    let ch = ChannelSet::from_gains(&[G_UP; 3], &[G_DOWN; 3], 1e-9).unwrap();
    let run = run_aiis(&cfg, &ch, &AiisOptions::default()).unwrap();
    assert!(run.trace.objective_converged);
    let a = &run.allocation;
    for i in 1..3 {
        assert!((a.p[i] - a.p[0]).abs() <= 1e-5 * a.p[0]);
        assert!((a.m[i] - a.m[0]).abs() <= 1e-5 * a.m[0]);
        assert!((a.r[i] - a.r[0]).abs() <= 1e-5 * a.r[0]);
    }
}

#[test]
fn restarting_from_the_result_stops_after_one_alternation() {
    let cfg = SystemConfig::default().with_vehicles(4);
    let ch = generate_channels(&cfg, 5).unwrap();
    let first = run_aiis(&cfg, &ch, &AiisOptions::default()).unwrap();
    assert!(first.trace.objective_converged);
    let opts = AiisOptions {
        initial_allocation: Some(first.allocation.clone()),
        ..AiisOptions::default()
    };
    let second = run_aiis(&cfg, &ch, &opts).unwrap();
    assert_eq!(second.trace.alternation_count(), 1);
    assert!((second.report.avg_ee - first.report.avg_ee).abs() <= 1e-6 * first.report.avg_ee);
}

#[test]
fn block_solve_is_idempotent() {
    let cfg = SystemConfig::default().with_vehicles(4);
    let ch = generate_channels(&cfg, 9).unwrap();
    let start = run_aiis(
        &cfg,
        &ch,
        &AiisOptions {
            max_alternations: 1,
            ..AiisOptions::default()
        },
    )
    .unwrap()
    .allocation;
    let opts = SolverOptions::default();
    for b in Block::ALL {
        let once = solve_block(&cfg, &ch, &start, b, &opts).unwrap();
        let twice = solve_block(&cfg, &ch, &once.allocation, b, &opts).unwrap();
        assert!(
            (twice.objective - once.objective).abs() <= 1e-6 * once.objective,
            "{b:?}: {} then {}",
            once.objective,
            twice.objective
        );
    }
}

#[test]
fn rejected_block_leaves_allocation_unchanged() {
    let cfg = SystemConfig::default().with_vehicles(3);
    let ch = generate_channels(&cfg, 2).unwrap();
    let run = run_aiis(&cfg, &ch, &AiisOptions::default()).unwrap();
    for b in Block::ALL {
        let out = solve_block(&cfg, &ch, &run.allocation, b, &SolverOptions::default()).unwrap();
        assert!(out.objective >= run.report.avg_ee);
        if !out.accepted {
            assert_eq!(out.allocation, eliminate_frequency(&cfg, &run.allocation).unwrap());
        }
    }
}

#[test]
fn vehicle_relabelling_keeps_the_objective() {
    let cfg = SystemConfig::default().with_vehicles(3).with_uniform_task(1e5);
    let up = [8e-7, 1e-6, 1.3e-6];
    let down = [800.0, 1000.0, 1200.0];
    let perm = [2usize, 0, 1];
    let ch = ChannelSet::from_gains(&up, &down, 1e-9).unwrap();
    let ch_perm = ChannelSet::from_gains(
        &perm.map(|i| up[i]),
        &perm.map(|i| down[i]),
        1e-9,
    )
    .unwrap();
    let a = run_aiis(&cfg, &ch, &AiisOptions::default()).unwrap();
    let b = run_aiis(&cfg, &ch_perm, &AiisOptions::default()).unwrap();
    let rel = (a.report.avg_ee - b.report.avg_ee).abs() / a.report.avg_ee;
    assert!(rel <= 1e-5, "relative gap {rel:e}");
}

#[test]
fn jacobi_rule_improves_and_converges() {
    let cfg = SystemConfig::default().with_vehicles(4);
    let ch = generate_channels(&cfg, 1).unwrap();
    let opts = AiisOptions {
        update_rule: UpdateRule::Jacobi,
        ..AiisOptions::default()
    };
    let run = run_aiis(&cfg, &ch, &opts).unwrap();
    assert!(run.trace.objective_converged);
    let obj = run.trace.objectives();
    for w in obj.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let gs = run_aiis(&cfg, &ch, &AiisOptions::default()).unwrap();
    assert!(run.report.avg_ee >= run.trace.initial_objective);
    assert!((run.report.avg_ee - gs.report.avg_ee).abs() <= 1e-2 * gs.report.avg_ee);
}

#[test]
fn block_order_parses_and_rejects() {
    let o: BlockOrder = "rmp".parse().unwrap();
    assert_eq!(o.blocks(), &[Block::R, Block::M, Block::P]);
    assert_eq!(o.to_string(), "rmp");
    for bad in ["pp", "pmrx", "", "pm"] {
        assert!(bad.parse::<BlockOrder>().is_err(), "{bad}");
    }
}

#[test]
fn options_validation() {
    assert!(AiisOptions::default().validate().is_ok());
    assert!(AiisOptions { eps_converge: 0.0, ..AiisOptions::default() }.validate().is_err());
    assert!(AiisOptions { max_alternations: 0, ..AiisOptions::default() }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn traces_never_decrease(seed in 0u64..10_000, order in 0usize..6) {
        let orders = ["pmr", "prm", "mpr", "mrp", "rpm", "rmp"];
        let cfg = SystemConfig { seed, ..SystemConfig::default().with_vehicles(5) };
        let ch = generate_channels(&cfg, 0).unwrap();
        let opts = AiisOptions { block_order: orders[order].parse().unwrap(), ..AiisOptions::default() };
        let run = run_aiis(&cfg, &ch, &opts).unwrap();
        let mut last = run.trace.initial_objective;
        for alt in &run.trace.alternations {
            prop_assert!(alt.objective >= last);
            for step in &alt.steps {
                prop_assert!(step.objective >= last);
                last = step.objective;
            }
            last = alt.objective;
        }
        prop_assert!(run.trace.alternation_count() <= opts.max_alternations);
    }
}

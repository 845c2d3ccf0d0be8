use proptest::prelude::*;

use swipt_mec::aiis::{default_initial_allocation, eliminate_frequency, repair, Block};
use swipt_mec::channel::{generate_channels, ChannelSet};
use swipt_mec::config::SystemConfig;
use swipt_mec::constraints::{evaluate_constraints, ConstraintId, Tolerance};
use swipt_mec::eval::{evaluate, Allocation};
use swipt_mec::model::*;
use swipt_mec::nlp::SolverOptions;

fn cfg() -> SystemConfig {
    SystemConfig::default()
}

/// Frequency bound lifted so the closed form is defined for every input.
fn unbounded() -> SystemConfig {
    SystemConfig {
        f_max: f64::INFINITY,
        ..cfg()
    }
}

proptest! {
    #[test]
    fn sinr_monotone_in_each_argument(
        p in 0.01f64..10.0,
        g_up in 0.01f64..10.0,
        g_si in 0.0f64..5.0,
        bump in 1.01f64..3.0,
    ) {
        let c = cfg();
        let base = uplink_sinr(p, g_up, &c, g_si);
        prop_assert!(uplink_sinr(p * bump, g_up, &c, g_si) > base);
        prop_assert!(uplink_sinr(p, g_up * bump, &c, g_si) > base);
        prop_assert!(uplink_sinr(p, g_up, &c, g_si * bump + 1e-3) < base);
        let noisier = SystemConfig { sigma2_an: c.sigma2_an * bump, ..c.clone() };
        prop_assert!(uplink_sinr(p, g_up, &noisier, g_si) < base);
    }

    #[test]
    fn physical_rate_never_exceeds_ideal(p in 0.0f64..10.0, g_up in 0.0f64..10.0, g_si in 0.0f64..5.0) {
        let c = cfg();
        let physical = uplink_rate(uplink_sinr(p, g_up, &c, g_si), &c);
        let ideal = max_uplink_rate(p, g_up, &c);
        prop_assert!(physical <= ideal);
        if p * g_up > 0.0 && g_si > 1e-9 {
            prop_assert!(physical < ideal);
        }
        prop_assert_eq!(uplink_rate(uplink_sinr(p, g_up, &c, 0.0), &c), ideal);
    }

    #[test]
    fn closed_form_frequency_is_energy_optimal(
        local in 1.0f64..1e6,
        tau in 1e-4f64..1.0,
        over in 1.0001f64..10.0,
    ) {
        let c = unbounded();
        let big_m = local + 10.0;
        let f_opt = optimal_cpu_frequency(big_m, 10.0, tau, &c).unwrap();
        let e_opt = local_energy(big_m, 10.0, tau, &c).unwrap();
        // Any faster uniform frequency burns more energy.
        prop_assert!(local_energy_at(local, f_opt * over, &c) > e_opt);
        // The completion time equals the uplink slot exactly at the optimum.
        let tau_lo = c.cycles_per_bit * local / f_opt;
        prop_assert!((tau_lo - tau).abs() <= 1e-12 * tau);
        // Closed form kappa C^3 (M - m)^3 / tau^2.
        let direct = c.kappa * c.cycles_per_bit.powi(3) * local.powi(3) / (tau * tau);
        prop_assert!((e_opt - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn bit_counts_scale_times_and_local_energy(
        m in 1e3f64..1e5,
        extra in 1e3f64..1e5,
        r in 1e6f64..5e7,
        scale in 1.5f64..8.0,
    ) {
        let c = unbounded();
        let big_m = m + extra;
        let (tau, _) = uplink_time_energy(m, r, 1.0).unwrap();
        let (tau_s, _) = uplink_time_energy(m * scale, r, 1.0).unwrap();
        prop_assert!((tau_s - scale * tau).abs() <= 1e-12 * tau_s);
        let f = optimal_cpu_frequency(big_m, m, tau, &c).unwrap();
        let f_s = optimal_cpu_frequency(big_m * scale, m * scale, tau_s, &c).unwrap();
        // Local bits and slot both scale, so the frequency is unchanged and
        // the energy scales linearly.
        prop_assert!((f_s - f).abs() <= 1e-12 * f);
        let e = local_energy_at(big_m - m, f, &c);
        let e_s = local_energy_at(scale * (big_m - m), f_s, &c);
        prop_assert!((e_s - scale * e).abs() <= 1e-10 * e_s);
    }

    #[test]
    fn same_trial_gives_identical_reports(seed in 0u64..1_000, trial in 0u64..1_000) {
        let c = SystemConfig { seed, ..cfg() };
        let a = generate_channels(&c, trial).unwrap();
        let b = generate_channels(&c, trial).unwrap();
        prop_assert_eq!(&a, &b);
        let alloc = eliminate_frequency(&c, &default_initial_allocation(&c, &a)).unwrap();
        let ra = evaluate(&c, &a, &alloc).unwrap();
        let rb = evaluate(&c, &b, &alloc).unwrap();
        prop_assert_eq!(
            ra.ee.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            rb.ee.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let ca = evaluate_constraints(&c, &a, &alloc, Tolerance::default()).unwrap();
        let cb = evaluate_constraints(&c, &b, &alloc, Tolerance::default()).unwrap();
        prop_assert_eq!(format!("{ca:?}"), format!("{cb:?}"));
    }

    #[test]
    fn energy_constraints_imply_vehicle_energy_below_radiated(
        g_down in 0.1f64..8.0,
        p in 1.0f64..5.0,
        frac in 0.05f64..0.95,
        s in 0.05f64..1.0,
    ) {
        let c = cfg().with_vehicles(1);
        let ch = ChannelSet::from_gains(&[4.0], &[g_down], 6.0).unwrap();
        let r = s * rate_cap(p, 4.0, 6.0, &c);
        let alloc = eliminate_frequency(&c, &Allocation::new(vec![p], vec![frac * c.task_bits[0]], vec![r])).unwrap();
        let rep = evaluate_constraints(&c, &ch, &alloc, Tolerance { rel: 0.0, abs_floor: 0.0 }).unwrap();
        if rep.group_satisfied(ConstraintId::C1) && rep.group_satisfied(ConstraintId::C2) {
            let ev = evaluate(&c, &ch, &alloc).unwrap();
            prop_assert!(ev.e_vn[0] + ev.e_lo[0] <= c.p_an * ev.tau_down[0]);
        }
    }
}

#[test]
fn derived_sinr_and_received_power_examples() {
    let c = cfg();
    // p_an g_si = 1e-7 with p_an = 10.
    let g_si = 1e-8;
    assert!((uplink_sinr(1.0, 1e-6, &c, g_si) - 5.0).abs() < 1e-12);
    assert!((uplink_received_power(1.0, 1e-6, &c, g_si) - 1.2e-6).abs() < 1e-18);
    let desired = 1e-6;
    let rx = uplink_received_power(1.0, 1e-6, &c, g_si);
    assert!((uplink_sinr(1.0, 1e-6, &c, g_si) - desired / (rx - desired)).abs() < 1e-9);
}

#[test]
fn phase_one_allocation_passes_independent_constraint_check() {
    let c = cfg();
    let ch = generate_channels(&c, 3).unwrap();
    let alloc = repair(&c, &ch, &default_initial_allocation(&c, &ch), &Block::ALL, &SolverOptions::default()).unwrap();
    let rep = evaluate_constraints(&c, &ch, &alloc, Tolerance::default()).unwrap();
    let ev = evaluate(&c, &ch, &alloc).unwrap();
    let k = c.vehicles;
    // Straight recomputation of every allocation-dependent constraint.
    for i in 0..k {
        assert!(ev.e_vn[i] + ev.e_lo[i] <= ev.e_eh[i]);
        assert!(alloc.f[i] <= c.f_max);
        assert!(alloc.p[i] >= c.p_min && alloc.p[i] <= c.p_max);
        assert!(alloc.m[i] >= 0.0 && alloc.m[i] <= c.task_bits[i]);
        assert!(alloc.r[i] <= rate_cap(alloc.p[i], ch.g_up[i], ch.g_si, &c));
        if i > 0 {
            assert!(ev.tau_down[i - 1] <= ev.tau_up[i]);
        }
    }
    assert!(ev.tau_up.iter().sum::<f64>() <= c.frame);
    assert!(ev.tau_down.iter().sum::<f64>() <= c.frame);
    for kt in 0..k {
        let t: f64 = ev.tau_up[..=kt].iter().sum::<f64>() + ev.tau_down[kt..].iter().sum::<f64>();
        assert!(t <= c.frame);
    }
    for id in rep.groups.iter().map(|g| g.id).filter(|id| *id != ConstraintId::C2) {
        assert!(rep.group_satisfied(id), "{id} violated");
    }
}

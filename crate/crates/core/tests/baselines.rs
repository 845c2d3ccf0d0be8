use swipt_mec::aiis::{default_initial_allocation, repair, AiisOptions, Block};
use swipt_mec::baselines::{run_fos, run_fvs, run_scheme, SchemeKind};
use swipt_mec::channel::generate_channels;
use swipt_mec::config::SystemConfig;
use swipt_mec::eval::evaluate;

fn setup(seed: u64) -> (SystemConfig, swipt_mec::channel::ChannelSet) {
    let cfg = SystemConfig { seed, ..SystemConfig::default().with_vehicles(5) };
    let ch = generate_channels(&cfg, 0).unwrap();
    (cfg, ch)
}

#[test]
fn fixed_scheme_is_the_repaired_start_evaluated() {
    let (cfg, ch) = setup(3);
    let opts = AiisOptions::default();
    let init = default_initial_allocation(&cfg, &ch);
    let repaired = repair(&cfg, &ch, &init, &Block::ALL, &opts.solver).unwrap();
    let (alloc, report) = run_fvs(&cfg, &ch, &init, &opts).unwrap();
    assert_eq!(alloc, repaired);
    assert_eq!(report, evaluate(&cfg, &ch, &repaired).unwrap());
    let run = run_scheme(SchemeKind::Fvs, &cfg, &ch, &opts).unwrap();
    assert_eq!(run.trace.alternation_count(), 0);
    assert_eq!(run.report.avg_ee, report.avg_ee);
}

#[test]
fn schemes_are_deterministic() {
    let (cfg, ch) = setup(4);
    for s in SchemeKind::ALL {
        let a = run_scheme(s, &cfg, &ch, &AiisOptions::default()).unwrap();
        let b = run_scheme(s, &cfg, &ch, &AiisOptions::default()).unwrap();
        assert_eq!(a.allocation, b.allocation, "{s}");
        assert_eq!(a.report.avg_ee.to_bits(), b.report.avg_ee.to_bits());
    }
}

#[test]
fn full_offloading_has_no_local_work() {
    let (cfg, ch) = setup(5);
    let init = default_initial_allocation(&cfg, &ch);
    let run = run_fos(&cfg, &ch, &init, &AiisOptions::default()).unwrap();
    for i in 0..cfg.vehicles {
        assert_eq!(run.allocation.m[i], cfg.task_bits[i]);
        assert_eq!(run.allocation.f[i], 0.0);
        assert_eq!(run.report.e_lo[i], 0.0);
        let (p, r) = (run.allocation.p[i], run.allocation.r[i]);
        let expect = r * r / (p * cfg.task_bits[i]);
        assert!((run.report.ee[i] - expect).abs() <= 1e-12 * expect);
    }
    for alt in &run.trace.alternations {
        assert!(alt.steps.iter().all(|s| s.block != Block::M));
    }
}

#[test]
fn optimizer_never_trails_the_fixed_scheme() {
    for seed in 1..=10 {
        let (cfg, ch) = setup(seed);
        let opts = AiisOptions::default();
        let aiis = run_scheme(SchemeKind::Aiis, &cfg, &ch, &opts).unwrap();
        let fvs = run_scheme(SchemeKind::Fvs, &cfg, &ch, &opts).unwrap();
        assert!(aiis.report.avg_ee >= fvs.report.avg_ee, "seed {seed}");
        assert_eq!(aiis.trace.initial_objective, fvs.report.avg_ee);
    }
}

#[test]
fn scheme_names_round_trip() {
    for s in SchemeKind::ALL {
        assert_eq!(s.as_str().parse::<SchemeKind>().unwrap(), s);
        assert_eq!(s.to_string().to_uppercase().parse::<SchemeKind>().unwrap(), s);
    }
    assert!("greedy".parse::<SchemeKind>().is_err());
}

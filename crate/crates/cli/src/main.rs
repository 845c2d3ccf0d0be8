//! `swipt-mec` command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swipt_mec::aiis::{AiisOptions, AiisTrace, BlockOrder};
use swipt_mec::baselines::{run_scheme, SchemeKind};
use swipt_mec::channel::generate_channels;
use swipt_mec::config::{RateCapMode, SystemConfig};
use swipt_mec::constraints::ConstraintReport;
use swipt_mec::eval::{Allocation, EvalReport};
use swipt_mec::experiments::{run_sweep, summarize, write_csv, write_outputs, SweepSpec};
use swipt_mec::selftest::{full_battery, gradcheck_blocks};
use swipt_mec::Error;

const GRADCHECK_LIMIT: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "swipt-mec", version = swipt_mec::VERSION, about = "Energy-efficiency optimizer for SWIPT-powered vehicular edge offloading")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// System configuration file (TOML); unset keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the rate cap mode of the configuration.
    #[arg(long, global = true, value_name = "ideal|si-limited")]
    rate_cap: Option<RateCapMode>,
    /// Block visiting order, e.g. `pmr` or `rmp`.
    #[arg(long, global = true, value_name = "ORDER")]
    block_order: Option<BlockOrder>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs one scheme on one channel realization and prints the reports.
    Simulate {
        #[arg(long, default_value = "aiis", value_name = "aiis|fvs|fos")]
        scheme: SchemeKind,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Writes the report here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Runs a sweep file and writes one CSV row per (value, scheme, trial).
    Sweep {
        /// Sweep specification (TOML).
        spec: PathBuf,
        /// CSV destination; overrides the file's `output`. Standard output
        /// when neither is given.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: Option<u32>,
    },
    /// Runs the analytic solver battery and the block gradient checks.
    SolverSelftest,
    /// Compares analytic block gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parses the configuration and prints every resolved parameter.
    ValidateConfig,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

fn config_failure(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn load_config(common: &Common) -> Result<SystemConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => SystemConfig::load(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => SystemConfig::default(),
    };
    if let Some(mode) = common.rate_cap {
        cfg.rate_cap_mode = mode;
    }
    cfg.validate().map_err(config_failure)?;
    Ok(cfg)
}

fn aiis_options(common: &Common) -> AiisOptions {
    let mut opts = AiisOptions::default();
    if let Some(order) = &common.block_order {
        opts.block_order = order.clone();
    }
    opts
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scheme: SchemeKind,
    trial: u64,
    version: &'a str,
    avg_ee: f64,
    alternations: usize,
    objective_converged: bool,
    feasible: bool,
    converged: bool,
    violated: Vec<String>,
    objectives: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    run: RunSummary<'a>,
    allocation: &'a Allocation,
    report: &'a EvalReport,
    constraints: &'a ConstraintReport,
}

fn summary<'a>(scheme: SchemeKind, trial: u64, trace: &AiisTrace, report: &EvalReport, cons: &ConstraintReport) -> RunSummary<'a> {
    RunSummary {
        scheme,
        trial,
        version: swipt_mec::VERSION,
        avg_ee: report.avg_ee,
        alternations: trace.alternation_count(),
        objective_converged: trace.objective_converged,
        feasible: trace.feasible,
        converged: trace.converged,
        violated: cons.violated().iter().map(|id| id.to_string()).collect(),
        objectives: trace.objectives(),
    }
}

fn write_data(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn simulate(common: &Common, scheme: SchemeKind, trial: u64, out: Option<&PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let opts = aiis_options(common);
    let ch = generate_channels(&cfg, trial).map_err(config_failure)?;
    let run = run_scheme(scheme, &cfg, &ch, &opts).map_err(|e| match e {
        Error::InvalidConfig(_) | Error::ConfigParse(_) | Error::Dimension(_) => config_failure(e),
        other => Failure::Solver(other.to_string()),
    })?;
    if !run.trace.converged {
        eprintln!(
            "note: run did not converge (objective converged: {}, violated: {:?})",
            run.trace.objective_converged,
            run.constraints.violated()
        );
    }
    let doc = SimulateOutput {
        run: summary(scheme, trial, &run.trace, &run.report, &run.constraints),
        allocation: &run.allocation,
        report: &run.report,
        constraints: &run.constraints,
    };
    let text = toml::to_string(&doc).map_err(|e| Failure::Io(e.to_string()))?;
    write_data(out, &text)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sweep(common: &Common, path: &PathBuf, out: Option<&PathBuf>, jobs: Option<u32>) -> Result<(), Failure> {
    let base = load_config(common)?;
    let mut spec = SweepSpec::load_over(path, base)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(mode) = common.rate_cap {
        spec.base.rate_cap_mode = mode;
    }
    if let Some(order) = &common.block_order {
        spec.options.block_order = order.clone();
    }
    spec.validate().map_err(config_failure)?;
    let jobs = jobs.map_or_else(default_jobs, |j| j as usize);
    eprintln!(
        "sweeping {} over {} values x {} trials x {} schemes on {jobs} threads",
        spec.axis,
        spec.values.len(),
        spec.trials,
        spec.schemes.len()
    );
    let rows = run_sweep(&spec, jobs).map_err(config_failure)?;
    let target = out.cloned().or_else(|| spec.output_path.clone());
    match &target {
        Some(p) => {
            write_outputs(&spec, &rows, p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
        }
        None => write_csv(&rows, std::io::stdout().lock()).map_err(io_failure)?,
    }
    for s in summarize(&rows) {
        eprintln!(
            "{} = {:<8} {:<4} mean avg_ee {:.4e} (se {:.2e}, {}/{} finite)",
            spec.axis, s.axis_value, s.scheme, s.mean.avg_ee, s.stderr.avg_ee, s.finite, s.trials
        );
    }
    Ok(())
}

fn selftest(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let cases = full_battery(&cfg).map_err(config_failure)?;
    let mut out = String::new();
    for c in &cases {
        out.push_str(&format!(
            "{} {:<20} {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    write_data(None, &out)?;
    let failed = cases.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} of {} self-test cases failed", cases.len())));
    }
    Ok(())
}

fn gradcheck(common: &Common, points: usize, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let seed = seed.unwrap_or(cfg.seed);
    let results = gradcheck_blocks(&cfg, points, seed).map_err(config_failure)?;
    let mut out = String::new();
    let mut bad = Vec::new();
    for g in &results {
        let ok = g.max_error <= GRADCHECK_LIMIT && g.points == points;
        out.push_str(&format!(
            "{} block {} max relative error {:.3e} over {} points\n",
            if ok { "PASS" } else { "FAIL" },
            g.block.letter(),
            g.max_error,
            g.points
        ));
        if !ok {
            bad.push(g.block.letter());
        }
    }
    write_data(None, &out)?;
    if !bad.is_empty() {
        return Err(Failure::Solver(format!("gradient check failed for blocks {bad:?}")));
    }
    Ok(())
}

fn validate_config(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    write_data(None, &cfg.to_toml_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate { scheme, trial, out } => simulate(common, scheme, trial, out.as_ref()),
        Command::Sweep { spec, out, jobs } => sweep(common, &spec, out.as_ref(), jobs),
        Command::SolverSelftest => selftest(common),
        Command::Gradcheck { points, seed } => gradcheck(common, points, seed),
        Command::ValidateConfig => validate_config(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

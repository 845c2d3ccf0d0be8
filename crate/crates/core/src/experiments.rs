//! Monte-Carlo sweeps over one system parameter.
//!
//! Trial `t` of every axis value draws its channels from the stream
//! `(base.seed, t)`, so axis values that keep `K` and `N` see identical
//! channels. Rows come back sorted by axis value, scheme and trial no matter
//! how many worker threads ran them.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aiis::{AiisOptions, BlockOrder, UpdateRule};
use crate::baselines::{run_scheme, SchemeKind};
use crate::channel::generate_channels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Uniform task size `M_i`, bits.
    #[serde(rename = "task_M")]
    TaskM,
    #[serde(rename = "antennas_N")]
    AntennasN,
    /// Vehicle count; task sizes become uniform at the base mean.
    #[serde(rename = "vehicles_K")]
    VehiclesK,
    /// Anchor-node transmit power, W.
    #[serde(rename = "an_power")]
    AnPower,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::TaskM => "task_M",
            SweepAxis::AntennasN => "antennas_N",
            SweepAxis::VehiclesK => "vehicles_K",
            SweepAxis::AnPower => "an_power",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::AntennasN | SweepAxis::VehiclesK)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        if self.integral() && !(value.fract() == 0.0 && value >= 1.0) {
            return Err(Error::InvalidSweep(format!(
                "{} values must be positive integers, got {value}",
                self.as_str()
            )));
        }
        let cfg = match self {
            SweepAxis::TaskM => base.clone().with_uniform_task(value),
            SweepAxis::AntennasN => SystemConfig {
                antennas: value as usize,
                ..base.clone()
            },
            SweepAxis::VehiclesK => base.clone().with_vehicles(value as usize),
            SweepAxis::AnPower => SystemConfig {
                p_an: value,
                ..base.clone()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task_M" => Ok(SweepAxis::TaskM),
            "antennas_N" => Ok(SweepAxis::AntennasN),
            "vehicles_K" => Ok(SweepAxis::VehiclesK),
            "an_power" => Ok(SweepAxis::AnPower),
            _ => Err(Error::InvalidSweep(format!("unknown axis \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<SchemeKind>,
    pub base: SystemConfig,
    pub output_path: Option<PathBuf>,
    pub options: AiisOptions,
}

pub const DEFAULT_TRIALS: usize = 20;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: SweepAxis,
    values: Vec<f64>,
    trials: Option<usize>,
    schemes: Option<Vec<SchemeKind>>,
    output: Option<PathBuf>,
    block_order: Option<BlockOrder>,
    update_rule: Option<UpdateRule>,
    base: Option<toml::Table>,
}

impl SweepSpec {
    /// Sweep over `axis` with default trials, all schemes and default options.
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: SystemConfig) -> Self {
        Self {
            axis,
            values,
            trials: DEFAULT_TRIALS,
            schemes: SchemeKind::ALL.to_vec(),
            base,
            output_path: None,
            options: AiisOptions::default(),
        }
    }

    /// Parses a sweep file. Keys in its `[base]` table override `base`.
    pub fn from_toml_str_over(text: &str, base: SystemConfig) -> Result<Self> {
        let file: SweepFile = toml::from_str(text)?;
        let base = match file.base {
            Some(table) => {
                let text = toml::to_string(&table).map_err(|e| Error::InvalidSweep(e.to_string()))?;
                SystemConfig::from_toml_str_over(&text, base)?
            }
            None => base,
        };
        let mut options = AiisOptions::default();
        if let Some(order) = file.block_order {
            options.block_order = order;
        }
        if let Some(rule) = file.update_rule {
            options.update_rule = rule;
        }
        let spec = Self {
            axis: file.axis,
            values: file.values,
            trials: file.trials.unwrap_or(DEFAULT_TRIALS),
            schemes: file.schemes.unwrap_or_else(|| SchemeKind::ALL.to_vec()),
            base,
            output_path: file.output,
            options,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_over(text, SystemConfig::default())
    }

    pub fn load_over(path: impl AsRef<Path>, base: SystemConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str_over(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSweep(msg));
        if self.values.is_empty() {
            return fail("value list is empty".into());
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return fail("values must be strictly increasing".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return fail("no schemes selected".into());
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return fail("schemes listed twice".into());
        }
        self.base.validate()?;
        self.options.validate()?;
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// One (axis value, scheme, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub scheme: SchemeKind,
    pub trial: u64,
    pub avg_ee: f64,
    pub sum_tau_up: f64,
    pub var_ee: f64,
    pub var_tau_up: f64,
    pub alternations: usize,
    pub converged: bool,
    /// Digest of the channel set the row was computed on; 0 if channel
    /// generation failed.
    pub channel_digest: u64,
}

fn failed_row(axis: SweepAxis, value: f64, scheme: SchemeKind, trial: u64, digest: u64) -> SweepRow {
    SweepRow {
        axis,
        axis_value: value,
        scheme,
        trial,
        avg_ee: f64::NAN,
        sum_tau_up: f64::NAN,
        var_ee: f64::NAN,
        var_tau_up: f64::NAN,
        alternations: 0,
        converged: false,
        channel_digest: digest,
    }
}

fn run_point(spec: &SweepSpec, value: f64, trial: u64) -> Vec<SweepRow> {
    let axis = spec.axis;
    let cfg = match axis.apply(&spec.base, value) {
        Ok(cfg) => cfg,
        Err(_) => {
            return spec
                .schemes
                .iter()
                .map(|&s| failed_row(axis, value, s, trial, 0))
                .collect()
        }
    };
    let ch = match generate_channels(&cfg, trial) {
        Ok(ch) => ch,
        Err(_) => {
            return spec
                .schemes
                .iter()
                .map(|&s| failed_row(axis, value, s, trial, 0))
                .collect()
        }
    };
    let digest = ch.digest();
    spec.schemes
        .iter()
        .map(|&scheme| match run_scheme(scheme, &cfg, &ch, &spec.options) {
            Ok(run) => SweepRow {
                axis,
                axis_value: value,
                scheme,
                trial,
                avg_ee: run.report.avg_ee,
                sum_tau_up: run.report.sum_tau_up,
                var_ee: run.report.var_ee,
                var_tau_up: run.report.var_tau_up,
                alternations: run.trace.alternation_count(),
                converged: run.trace.converged,
                channel_digest: digest,
            },
            Err(_) => failed_row(axis, value, scheme, trial, digest),
        })
        .collect()
}

/// Runs every (axis value, trial) pair on `jobs` worker threads.
///
/// Solver failures become rows with NaN metrics and `converged = false`.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials as u64).map(move |t| (v, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidSweep(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<(usize, SweepRow)> = pool.install(|| {
        points
            .par_iter()
            .flat_map_iter(|&(v, t)| {
                run_point(spec, spec.values[v], t)
                    .into_iter()
                    .map(move |row| (v, row))
            })
            .collect()
    });
    rows.sort_by(|(va, a), (vb, b)| {
        va.cmp(vb)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub const CSV_HEADER: &str =
    "axis,axis_value,scheme,trial,avg_ee,sum_tau_up,var_ee,var_tau_up,alternations,converged";

/// Writes rows as CSV with floats in shortest round-trip scientific notation.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{},{},{:e},{:e},{:e},{:e},{},{}",
            r.axis,
            r.axis_value,
            r.scheme,
            r.trial,
            r.avg_ee,
            r.sum_tau_up,
            r.var_ee,
            r.var_tau_up,
            r.alternations,
            r.converged
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'a str,
    axis: SweepAxis,
    values: &'a [f64],
    trials: usize,
    schemes: &'a [SchemeKind],
    block_order: String,
    update_rule: UpdateRule,
    base: &'a SystemConfig,
}

/// Sidecar contents: version string and the fully resolved sweep.
pub fn meta_toml(spec: &SweepSpec) -> String {
    let meta = Meta {
        version: crate::VERSION,
        axis: spec.axis,
        values: &spec.values,
        trials: spec.trials,
        schemes: &spec.schemes,
        block_order: spec.options.block_order.to_string(),
        update_rule: spec.options.update_rule,
        base: &spec.base,
    };
    toml::to_string(&meta).expect("metadata serializes")
}

/// `<csv path>.meta.toml`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

/// Writes the CSV to `path` and the metadata next to it.
pub fn write_outputs(spec: &SweepSpec, rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    std::fs::write(path, buf)?;
    std::fs::write(meta_path(path), meta_toml(spec))?;
    Ok(())
}

/// Per-metric values used by [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub avg_ee: f64,
    pub sum_tau_up: f64,
    pub var_ee: f64,
    pub var_tau_up: f64,
}

impl Metrics {
    fn of(r: &SweepRow) -> [f64; 4] {
        [r.avg_ee, r.sum_tau_up, r.var_ee, r.var_tau_up]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            avg_ee: a[0],
            sum_tau_up: a[1],
            var_ee: a[2],
            var_tau_up: a[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis_value: f64,
    pub scheme: SchemeKind,
    /// Rows in the group.
    pub trials: usize,
    /// Rows with finite metrics.
    pub finite: usize,
    pub mean: Metrics,
    /// Sample standard deviation over `sqrt(n)`; zero for a single row.
    pub stderr: Metrics,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    if xs.iter().all(|x| *x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt())
}

/// Mean and standard error of every metric per (axis value, scheme),
/// sorted by axis value then scheme. Non-finite metrics are skipped.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.axis_value
            .total_cmp(&b.axis_value)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.trial.cmp(&b.trial))
    });
    let mut keys: Vec<(f64, SchemeKind)> = sorted.iter().map(|r| (r.axis_value, r.scheme)).collect();
    keys.dedup_by(|a, b| a.0.to_bits() == b.0.to_bits() && a.1 == b.1);
    keys.into_iter()
        .map(|(value, scheme)| {
            let group: Vec<&SweepRow> = sorted
                .iter()
                .copied()
                .filter(|r| r.axis_value.to_bits() == value.to_bits() && r.scheme == scheme)
                .collect();
            let mut mean = [0.0; 4];
            let mut se = [0.0; 4];
            for j in 0..4 {
                let col: Vec<f64> = group.iter().map(|r| Metrics::of(r)[j]).collect();
                (mean[j], se[j]) = mean_stderr(&col);
            }
            SummaryRow {
                axis_value: value,
                scheme,
                trials: group.len(),
                finite: group.iter().filter(|r| r.avg_ee.is_finite()).count(),
                mean: Metrics::from_array(mean),
                stderr: Metrics::from_array(se),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, scheme: SchemeKind, trial: u64, ee: f64) -> SweepRow {
        SweepRow {
            axis: SweepAxis::TaskM,
            axis_value: value,
            scheme,
            trial,
            avg_ee: ee,
            sum_tau_up: 0.1,
            var_ee: 0.0,
            var_tau_up: 0.0,
            alternations: 1,
            converged: true,
            channel_digest: 7,
        }
    }

    #[test]
    fn single_row_summary_has_zero_stderr() {
        let s = summarize(&[row(1.0, SchemeKind::Aiis, 0, 5.0)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean.avg_ee, 5.0);
        assert_eq!(s[0].stderr.avg_ee, 0.0);
    }

    #[test]
    fn three_row_group_matches_hand_arithmetic() {
        let rows = [
            row(1.0, SchemeKind::Fos, 0, 1.0),
            row(1.0, SchemeKind::Fos, 1, 2.0),
            row(1.0, SchemeKind::Fos, 2, 6.0),
        ];
        let s = &summarize(&rows)[0];
        // mean 3, sample variance (4 + 1 + 9) / 2 = 7
        assert_eq!(s.mean.avg_ee, 3.0);
        assert!((s.stderr.avg_ee - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.stderr.sum_tau_up, 0.0);
    }

    #[test]
    fn nan_rows_are_skipped() {
        let rows = [
            row(1.0, SchemeKind::Aiis, 0, 2.0),
            row(1.0, SchemeKind::Aiis, 1, f64::NAN),
        ];
        let s = &summarize(&rows)[0];
        assert_eq!(s.trials, 2);
        assert_eq!(s.finite, 1);
        assert_eq!(s.mean.avg_ee, 2.0);
    }

    #[test]
    fn spec_file_round_trip() {
        let text = r#"
axis = "an_power"
values = [10.0, 20.0, 30.0]
trials = 3
schemes = ["aiis", "fos"]
block_order = "prm"

[base]
K = 4
N = 6
"#;
        let spec = SweepSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.axis, SweepAxis::AnPower);
        assert_eq!(spec.trials, 3);
        assert_eq!(spec.schemes, vec![SchemeKind::Aiis, SchemeKind::Fos]);
        assert_eq!(spec.base.vehicles, 4);
        assert_eq!(spec.base.task_bits.len(), 4);
        assert_eq!(spec.options.block_order.to_string(), "prm");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for text in [
            "axis = \"task_M\"\nvalues = []\n",
            "axis = \"task_M\"\nvalues = [2e5, 1e5]\n",
            "axis = \"task_M\"\nvalues = [1e5]\ntrials = 0\n",
            "axis = \"antennas_N\"\nvalues = [6.5]\n",
            "axis = \"bogus\"\nvalues = [1.0]\n",
            "axis = \"task_M\"\nvalues = [1e5]\ncolour = 1\n",
            "axis = \"task_M\"\nvalues = [1e5]\n[base]\nQ = 1\n",
        ] {
            assert!(SweepSpec::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn axis_application() {
        let base = SystemConfig::default();
        assert_eq!(SweepAxis::TaskM.apply(&base, 3e5).unwrap().task_bits, vec![3e5; 10]);
        assert_eq!(SweepAxis::AntennasN.apply(&base, 6.0).unwrap().antennas, 6);
        let k3 = SweepAxis::VehiclesK.apply(&base, 3.0).unwrap();
        assert_eq!((k3.vehicles, k3.task_bits.len()), (3, 3));
        assert_eq!(SweepAxis::AnPower.apply(&base, 25.0).unwrap().p_an, 25.0);
    }

    #[test]
    fn csv_uses_scientific_floats() {
        let mut buf = Vec::new();
        write_csv(&[row(1e5, SchemeKind::Fvs, 2, 1.5e9)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("task_M,1e5,fvs,2,1.5e9,1e-1,0e0,0e0,1,true"));
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta.toml"));
    }
}

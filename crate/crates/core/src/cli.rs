//! Command-line front end.
//!
//! Every subcommand reads a configuration file (see [`crate::config`]) and
//! writes either aligned text or JSON Lines (`--format structured`). In the
//! structured form each line is one object whose first field `record` names
//! its kind. Exact quantities are strings (`"4/7"`, `"30.95"`) so nothing is
//! lost to JSON number parsing; simulation estimates are plain numbers.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::avg_solver::solve_avg;
use crate::capacity::{capacity_asym_unsorted, corner_points, pir_capacity, TrafficRatio};
use crate::config::{parse_rational, ConfigFile};
use crate::error::{Error, Result};
use crate::model::{
    mixture_avg_aoi, mixture_peak_aoi, DownloadAllocation, Metric, MixtureComponent, MixturePolicy,
    Solution, SystemConfig,
};
use crate::oracle::{default_resolution, verify, VerifyReport};
use crate::peak_solver::solve_peak;
use crate::scalar::Scalar;
use crate::sim::{self, DelayDistribution, SimResult};

/// Exit status for an unreadable or invalid configuration.
pub const EXIT_INVALID: i32 = 2;
/// Exit status when `r_min` cannot be met.
pub const EXIT_INFEASIBLE: i32 = 3;
/// Exit status when the oracle rejects a solution.
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "timely-pir",
    version,
    about = "Rate/age tradeoffs for private retrieval from replicated servers"
)]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// JSON Lines with a fixed field order.
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Peak,
    Avg,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Peak => Metric::Peak,
            MetricArg::Avg => Metric::Average,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PIR capacity, C(τ) and the corner-point table.
    Capacity(CapacityArgs),
    /// Optimal allocation for one metric, checked against the grid oracle.
    Solve(SolveArgs),
    /// Optimal peak and average age over a grid of minimum rates.
    Tradeoff(TradeoffArgs),
    /// Monte Carlo ages of a solved or explicit policy.
    Simulate(SimulateArgs),
    /// Solve, then compare against an exhaustive grid search.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    pub config: PathBuf,
    /// Traffic ratio, overriding `tau` in the file.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational)]
    pub tau: Option<Vec<BigRational>>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Peak)]
    pub metric: MetricArg,
    /// Minimum rate, overriding `r_min` in the file.
    #[arg(long, value_parser = parse_rational)]
    pub rmin: Option<BigRational>,
    /// Oracle grid spacing; defaults to L/32.
    #[arg(long, value_parser = parse_rational)]
    pub resolution: Option<BigRational>,
    /// Skip the oracle check.
    #[arg(long)]
    pub no_verify: bool,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    pub config: PathBuf,
    /// Explicit grid `start:stop:step`, stop included.
    #[arg(long, value_parser = parse_grid, conflicts_with = "points")]
    pub rmin_grid: Option<RateGrid>,
    /// Number of evenly spaced rates over `[1/M, C_PIR]`.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// File holding the structured output of `solve`.
    #[arg(long, conflicts_with = "alloc", required_unless_present = "alloc")]
    pub solution: Option<PathBuf>,
    /// Fixed integer allocation, e.g. `8,6`.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational)]
    pub alloc: Option<Vec<BigRational>>,
    #[arg(long, default_value_t = 1_000_000)]
    pub epochs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent runs with seeds `seed, seed + 1, …`.
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Peak)]
    pub metric: MetricArg,
    #[arg(long, value_parser = parse_rational)]
    pub rmin: Option<BigRational>,
    #[arg(long, value_parser = parse_rational)]
    pub resolution: Option<BigRational>,
    /// Test hook: halve the solved allocation before checking it.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// `start:stop:step` over exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrid {
    pub start: BigRational,
    pub stop: BigRational,
    pub step: BigRational,
}

impl RateGrid {
    pub fn values(&self) -> Vec<BigRational> {
        let mut out = Vec::new();
        let mut r = self.start.clone();
        while r <= self.stop {
            out.push(r.clone());
            r += &self.step;
        }
        out
    }
}

fn parse_grid(text: &str) -> std::result::Result<RateGrid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got `{text}`"));
    };
    let grid = RateGrid {
        start: parse_rational(a)?,
        stop: parse_rational(b)?,
        step: parse_rational(c)?,
    };
    if grid.step <= BigRational::zero() {
        return Err("grid step must be positive".into());
    }
    if grid.stop < grid.start {
        return Err("grid stop is below start".into());
    }
    Ok(grid)
}

/// `n` evenly spaced rates from `lo` to `hi`, both included.
pub fn linspace(lo: &BigRational, hi: &BigRational, n: usize) -> Vec<BigRational> {
    if n <= 1 || lo == hi {
        return vec![lo.clone()];
    }
    let den = BigRational::from_integer((n as i64 - 1).into());
    (0..n)
        .map(|i| lo + (hi - lo) * BigRational::from_integer((i as i64).into()) / &den)
        .collect()
}

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::RateOutOfRange { .. }
        | Error::Infeasible(_)
        | Error::FallbackInfeasible(_)
        | Error::OutsideHull => EXIT_INFEASIBLE,
        Error::NonConvergence(_) | Error::NonRealStationaryPoint(_) | Error::TooLarge { .. } => 1,
        _ => EXIT_INVALID,
    }
}

/// Whether a completed command should report failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::VerificationFailed => EXIT_VERIFY_FAILED,
        }
    }
}

/// Runs one parsed command line, writing its report to `out`.
pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<Outcome> {
    let fmt = cli.format;
    match &cli.command {
        Command::Capacity(a) => capacity(a, fmt, out),
        Command::Solve(a) => solve(a, fmt, out),
        Command::Tradeoff(a) => tradeoff(a, fmt, out),
        Command::Simulate(a) => simulate(a, fmt, out),
        Command::Verify(a) => verify_cmd(a, fmt, out),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with<I, S, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INVALID } else { 0 };
        }
    };
    match execute(&cli, out) {
        Ok(o) => o.code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path, rmin: Option<&BigRational>) -> Result<ConfigFile> {
    let mut file = ConfigFile::load(path)?;
    if let Some(r) = rmin {
        file.system = file.system.with_r_min(r.clone())?;
    }
    Ok(file)
}

fn json_line<W: Write, R: Serialize>(out: &mut W, record: &R) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

fn strings<T: Scalar>(v: &[T]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

#[derive(Serialize)]
struct CapacityRecord {
    record: &'static str,
    servers: usize,
    messages: usize,
    message_size: u64,
    c_pir: String,
    tau: Option<Vec<String>>,
    c_tau: Option<String>,
}

#[derive(Serialize)]
struct CornerRecord {
    record: &'static str,
    allocation: Vec<String>,
    total: String,
    rate: String,
}

fn capacity<W: Write>(a: &CapacityArgs, fmt: Format, out: &mut W) -> Result<Outcome> {
    let file = ConfigFile::load(&a.config)?;
    let sys = &file.system;
    let (n, m) = (sys.num_servers(), sys.num_messages());
    let tau = a.tau.clone().or(file.tau);
    let c_tau = match &tau {
        Some(t) => {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.len(),
                });
            }
            Some(capacity_asym_unsorted(&TrafficRatio::new(t.clone())?, m)?)
        }
        None => None,
    };
    let cap = pir_capacity(n, m);
    let corners = corner_points::<BigRational>(n, m, sys.message_size())?;
    match fmt {
        Format::Text => {
            writeln!(out, "N = {n}, M = {m}, L = {}", sys.message_size())?;
            writeln!(out, "C_PIR = {cap}")?;
            if let (Some(t), Some(c)) = (&tau, &c_tau) {
                writeln!(out, "C(tau) = {c} for tau = ({})", strings(t).join(", "))?;
            }
            writeln!(out, "corner points:")?;
            writeln!(out, "  {:<24} {:>10} {:>8}", "allocation", "total", "rate")?;
            for c in &corners {
                writeln!(
                    out,
                    "  {:<24} {:>10} {:>8}",
                    c.allocation.to_string(),
                    c.allocation.total().to_string(),
                    c.rate.to_string()
                )?;
            }
        }
        Format::Structured => {
            json_line(
                out,
                &CapacityRecord {
                    record: "capacity",
                    servers: n,
                    messages: m,
                    message_size: sys.message_size(),
                    c_pir: cap.to_string(),
                    tau: tau.as_deref().map(strings),
                    c_tau: c_tau.map(|c| c.to_string()),
                },
            )?;
            for c in &corners {
                json_line(
                    out,
                    &CornerRecord {
                        record: "corner",
                        allocation: strings(c.allocation.entries()),
                        total: c.allocation.total().to_string(),
                        rate: c.rate.to_string(),
                    },
                )?;
            }
        }
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub probability: String,
    pub allocation: Vec<String>,
}

/// Structured form of a [`Solution`]; what `simulate --solution` reads back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub record: String,
    pub metric: String,
    pub branch: String,
    pub r_min: String,
    pub allocation: Vec<String>,
    pub objective: String,
    pub idealized_objective: String,
    pub achieved_rate: String,
    pub mixture: Vec<ComponentRecord>,
}

impl SolutionRecord {
    pub fn new<T: Scalar>(s: &Solution<T>, r_min: &T) -> Self {
        Self {
            record: "solution".into(),
            metric: s.metric.to_string(),
            branch: s.branch.to_string(),
            r_min: r_min.to_string(),
            allocation: strings(s.allocation.entries()),
            objective: s.objective.to_string(),
            idealized_objective: s.idealized_objective.to_string(),
            achieved_rate: s.achieved_rate.to_string(),
            mixture: s
                .mixture
                .components()
                .iter()
                .map(|c| ComponentRecord {
                    probability: c.probability.to_string(),
                    allocation: strings(c.allocation.entries()),
                })
                .collect(),
        }
    }

    /// The time-sharing policy, read back in floating point.
    pub fn policy(&self) -> Result<MixturePolicy<f64>> {
        let num = |s: &String, field: &str| {
            parse_rational(s)
                .map(|q| q.to_f64())
                .map_err(|m| Error::Parse {
                    line: 0,
                    field: field.into(),
                    message: m,
                })
        };
        let components = self
            .mixture
            .iter()
            .map(|c| {
                let d = c
                    .allocation
                    .iter()
                    .map(|v| num(v, "mixture.allocation"))
                    .collect::<Result<Vec<_>>>()?;
                Ok(MixtureComponent {
                    allocation: DownloadAllocation::new(d)?,
                    probability: num(&c.probability, "mixture.probability")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MixturePolicy::new(components)
    }
}

#[derive(Serialize)]
struct VerifyRecord {
    record: &'static str,
    metric: String,
    pass: bool,
    recomputed: String,
    oracle_objective: String,
    oracle_allocation: Vec<String>,
    gap: f64,
    slack: f64,
    resolution: String,
    violations: Vec<String>,
}

impl VerifyRecord {
    fn new<T: Scalar>(r: &VerifyReport<T>, resolution: &T) -> Self {
        Self {
            record: "verify",
            metric: r.metric.to_string(),
            pass: r.pass,
            recomputed: r.recomputed.to_string(),
            oracle_objective: r.oracle_objective.to_string(),
            oracle_allocation: strings(r.oracle_allocation.entries()),
            gap: r.gap,
            slack: r.slack,
            resolution: resolution.to_string(),
            violations: r.violations.clone(),
        }
    }
}

fn write_solution<W: Write, T: Scalar>(
    out: &mut W,
    fmt: Format,
    s: &Solution<T>,
    r_min: &T,
) -> Result<()> {
    match fmt {
        Format::Structured => json_line(out, &SolutionRecord::new(s, r_min)),
        Format::Text => {
            writeln!(out, "metric      {}", s.metric)?;
            writeln!(out, "r_min       {r_min}")?;
            writeln!(out, "branch      {}", s.branch)?;
            writeln!(out, "allocation  {}", s.allocation)?;
            writeln!(out, "age         {}", s.objective)?;
            if s.objective != s.idealized_objective {
                writeln!(out, "idealized   {}", s.idealized_objective)?;
            }
            writeln!(out, "rate        {}", s.achieved_rate)?;
            writeln!(out, "mixture")?;
            for c in s.mixture.components() {
                writeln!(out, "  {:<24} {}", c.probability.to_string(), c.allocation)?;
            }
            Ok(())
        }
    }
}

fn write_report<W: Write, T: Scalar>(
    out: &mut W,
    fmt: Format,
    r: &VerifyReport<T>,
    resolution: &T,
) -> Result<()> {
    match fmt {
        Format::Structured => json_line(out, &VerifyRecord::new(r, resolution)),
        Format::Text => {
            writeln!(out, "oracle      {} (resolution {resolution})", r.summary())?;
            Ok(())
        }
    }
}

fn float_solution(s: &Solution<BigRational>) -> Result<Solution<f64>> {
    let alloc = |d: &DownloadAllocation<BigRational>| {
        DownloadAllocation::new(d.entries().iter().map(|v| v.to_f64()).collect())
    };
    let components = s
        .mixture
        .components()
        .iter()
        .map(|c| {
            Ok(MixtureComponent {
                allocation: alloc(&c.allocation)?,
                probability: c.probability.to_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Solution {
        metric: s.metric,
        allocation: alloc(&s.allocation)?,
        mixture: MixturePolicy::new(components)?,
        objective: s.objective.to_f64(),
        idealized_objective: s.idealized_objective.to_f64(),
        achieved_rate: s.achieved_rate.to_f64(),
        branch: s.branch,
    })
}

/// Exact grids are used for two servers; larger grids run in `f64`.
const EXACT_ORACLE_MAX_SERVERS: usize = 2;

fn check_and_report<W: Write>(
    out: &mut W,
    fmt: Format,
    metric: Metric,
    sys: &SystemConfig<BigRational>,
    resolution: Option<&BigRational>,
    inject_fault: bool,
) -> Result<Outcome> {
    let res = resolution
        .cloned()
        .unwrap_or_else(|| default_resolution(sys));
    let fsys = sys.to_float::<f64>();
    let fres = res.to_f64();
    let pass = match metric {
        Metric::Peak => {
            let mut s = solve_peak(sys)?;
            if inject_fault {
                corrupt(&mut s);
            }
            if !inject_fault || fmt == Format::Text {
                write_solution(out, fmt, &s, sys.r_min())?;
            }
            if sys.num_servers() <= EXACT_ORACLE_MAX_SERVERS {
                let r = verify(&s, sys, &res)?;
                write_report(out, fmt, &r, &res)?;
                r.pass
            } else {
                let r = verify(&float_solution(&s)?, &fsys, &fres)?;
                write_report(out, fmt, &r, &fres)?;
                r.pass
            }
        }
        Metric::Average => {
            let mut s = solve_avg(&fsys)?;
            if inject_fault {
                corrupt(&mut s);
            }
            if !inject_fault || fmt == Format::Text {
                write_solution(out, fmt, &s, fsys.r_min())?;
            }
            let r = verify(&s, &fsys, &fres)?;
            write_report(out, fmt, &r, &fres)?;
            r.pass
        }
    };
    Ok(if pass {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

fn corrupt<T: Scalar>(s: &mut Solution<T>) {
    s.allocation = s.allocation.scaled(&T::from_ratio(1, 2));
}

fn solve<W: Write>(a: &SolveArgs, fmt: Format, out: &mut W) -> Result<Outcome> {
    let file = load(&a.config, a.rmin.as_ref())?;
    let sys = &file.system;
    let metric = Metric::from(a.metric);
    if a.no_verify {
        match metric {
            Metric::Peak => write_solution(out, fmt, &solve_peak(sys)?, sys.r_min())?,
            Metric::Average => {
                let fsys = sys.to_float::<f64>();
                write_solution(out, fmt, &solve_avg(&fsys)?, fsys.r_min())?
            }
        }
        return Ok(Outcome::Success);
    }
    check_and_report(out, fmt, metric, sys, a.resolution.as_ref(), false)
}

fn verify_cmd<W: Write>(a: &VerifyArgs, fmt: Format, out: &mut W) -> Result<Outcome> {
    let file = load(&a.config, a.rmin.as_ref())?;
    check_and_report(
        out,
        fmt,
        a.metric.into(),
        &file.system,
        a.resolution.as_ref(),
        a.inject_fault,
    )
}

/// One row of a tradeoff sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub record: &'static str,
    pub r_min: String,
    pub peak: String,
    pub peak_rate: String,
    pub avg_idealized: f64,
    pub avg_mixture: f64,
    /// `(mixture − idealized) / idealized`.
    pub avg_gap: f64,
    pub avg_rate: f64,
    pub avg_branch: String,
}

/// Optimal peak and average age at every rate in `grid`.
pub fn tradeoff_rows(
    sys: &SystemConfig<BigRational>,
    grid: &[BigRational],
) -> Result<Vec<TradeoffRow>> {
    grid.iter()
        .map(|r| {
            let c = sys.with_r_min(r.clone())?;
            let peak = solve_peak(&c)?;
            let avg = solve_avg(&c.to_float::<f64>())?;
            Ok(TradeoffRow {
                record: "tradeoff",
                r_min: r.to_string(),
                peak: peak.objective.to_string(),
                peak_rate: peak.achieved_rate.to_string(),
                avg_idealized: avg.idealized_objective,
                avg_mixture: avg.objective,
                avg_gap: (avg.objective - avg.idealized_objective) / avg.idealized_objective,
                avg_rate: avg.achieved_rate,
                avg_branch: avg.branch.to_string(),
            })
        })
        .collect()
}

fn tradeoff<W: Write>(a: &TradeoffArgs, fmt: Format, out: &mut W) -> Result<Outcome> {
    let file = ConfigFile::load(&a.config)?;
    let sys = &file.system;
    let grid = match &a.rmin_grid {
        Some(g) => g.values(),
        None => {
            let lo =
                BigRational::one() / BigRational::from_integer((sys.num_messages() as i64).into());
            let hi = pir_capacity(sys.num_servers(), sys.num_messages());
            linspace(&lo, &hi, a.points)
        }
    };
    let rows = tradeoff_rows(sys, &grid)?;
    match fmt {
        Format::Text => {
            writeln!(
                out,
                "r_min,r_min_decimal,peak,peak_rate,avg_idealized,avg_mixture,avg_gap,avg_rate,avg_branch"
            )?;
            for (r, row) in grid.iter().zip(&rows) {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    row.r_min,
                    r.to_f64(),
                    row.peak,
                    row.peak_rate,
                    row.avg_idealized,
                    row.avg_mixture,
                    row.avg_gap,
                    row.avg_rate,
                    row.avg_branch
                )?;
            }
        }
        Format::Structured => {
            for row in &rows {
                json_line(out, row)?;
            }
        }
    }
    Ok(Outcome::Success)
}

/// Reads the first `solution` record from a file of structured output.
pub fn read_solution(path: &Path) -> Result<SolutionRecord> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    for (i, line) in text.lines().enumerate() {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(line) else {
            continue;
        };
        if value.get("record").and_then(|r| r.as_str()) == Some("solution") {
            return serde_json::from_value(value).map_err(|e| Error::Parse {
                line: i + 1,
                field: "solution".into(),
                message: e.to_string(),
            });
        }
    }
    Err(Error::Parse {
        line: text.lines().count(),
        field: "solution".into(),
        message: "no solution record found".into(),
    })
}

#[derive(Serialize)]
struct SimRecord {
    record: &'static str,
    seed: u64,
    rng: &'static str,
    epochs: u64,
    empirical_peak: f64,
    peak_se: f64,
    analytic_peak: f64,
    peak_z: Option<f64>,
    empirical_avg: f64,
    avg_se: f64,
    analytic_avg: f64,
    avg_z: Option<f64>,
    mean_epoch: f64,
}

/// `(empirical − analytic) / se`; exact agreement with zero error counts as 0.
fn z_score(empirical: f64, analytic: f64, se: f64) -> Option<f64> {
    let diff = empirical - analytic;
    if se > 0.0 {
        Some(diff / se)
    } else if diff.abs() <= 1e-9 * (1.0 + analytic.abs()) {
        Some(0.0)
    } else {
        None
    }
}

fn simulate<W: Write>(a: &SimulateArgs, fmt: Format, out: &mut W) -> Result<Outcome> {
    let file = ConfigFile::load(&a.config)?;
    let fsys = file.system.to_float::<f64>();
    let n = fsys.num_servers();
    let policy = match (&a.solution, &a.alloc) {
        (Some(path), _) => read_solution(path)?.policy()?,
        (None, Some(d)) => MixturePolicy::degenerate(DownloadAllocation::new(
            d.iter().map(|v| v.to_f64()).collect(),
        )?),
        (None, None) => return Err(Error::InvalidConfig("give --solution or --alloc".into())),
    };
    if policy.num_servers() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: policy.num_servers(),
        });
    }
    let dists = fsys
        .servers()
        .iter()
        .enumerate()
        .map(|(i, s)| DelayDistribution::from_stats(s, file.families.as_ref().map(|f| f[i])))
        .collect::<Result<Vec<_>>>()?;
    let analytic_peak = mixture_peak_aoi(&policy, fsys.servers())?;
    let analytic_avg = mixture_avg_aoi(&policy, fsys.servers())?;
    let results: Vec<SimResult> = if a.replications <= 1 {
        vec![sim::run(&policy, &fsys, &dists, a.epochs, a.seed)?]
    } else {
        sim::replications(&policy, &fsys, &dists, a.epochs, a.seed, a.replications)?
    };
    let records: Vec<SimRecord> = results
        .iter()
        .map(|r| SimRecord {
            record: "simulation",
            seed: r.seed,
            rng: r.rng,
            epochs: r.num_epochs,
            empirical_peak: r.empirical_peak,
            peak_se: r.peak_se,
            analytic_peak,
            peak_z: z_score(r.empirical_peak, analytic_peak, r.peak_se),
            empirical_avg: r.empirical_avg,
            avg_se: r.avg_se,
            analytic_avg,
            avg_z: z_score(r.empirical_avg, analytic_avg, r.avg_se),
            mean_epoch: r.mean_epoch,
        })
        .collect();
    match fmt {
        Format::Structured => {
            for r in &records {
                json_line(out, r)?;
            }
        }
        Format::Text => {
            let families: Vec<String> = dists.iter().map(|d| d.family().to_string()).collect();
            writeln!(out, "delays      {}", families.join(", "))?;
            writeln!(out, "epochs      {} ({} rng)", a.epochs, sim::RNG_ALGORITHM)?;
            writeln!(
                out,
                "{:>8} {:>12} {:>10} {:>12} {:>7} {:>12} {:>10} {:>12} {:>7}",
                "seed", "peak", "se", "analytic", "z", "avg", "se", "analytic", "z"
            )?;
            let z = |v: Option<f64>| v.map_or("inf".to_string(), |z| format!("{z:.2}"));
            for r in &records {
                writeln!(
                    out,
                    "{:>8} {:>12.6} {:>10.3e} {:>12.6} {:>7} {:>12.6} {:>10.3e} {:>12.6} {:>7}",
                    r.seed,
                    r.empirical_peak,
                    r.peak_se,
                    r.analytic_peak,
                    z(r.peak_z),
                    r.empirical_avg,
                    r.avg_se,
                    r.analytic_avg,
                    z(r.avg_z)
                )?;
            }
            if records.len() > 1 {
                let within = |f: fn(&SimRecord) -> Option<f64>| {
                    records
                        .iter()
                        .filter(|r| f(r).is_some_and(|z| z.abs() <= 3.0))
                        .count()
                };
                writeln!(
                    out,
                    "within 3 se: peak {}/{}, avg {}/{}",
                    within(|r| r.peak_z),
                    records.len(),
                    within(|r| r.avg_z),
                    records.len()
                )?;
            }
        }
    }
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("1/3:1/2:1/12").unwrap();
        assert_eq!(g.values(), vec![ratio(1, 3), ratio(5, 12), ratio(1, 2)]);
        assert!(parse_grid("1/3:1/2").is_err());
        assert!(parse_grid("1/3:1/2:0").is_err());
        let l = linspace(&ratio(1, 3), &ratio(9, 13), 20);
        assert_eq!(l.len(), 20);
        assert_eq!(l[19], ratio(9, 13));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible("x".into())), EXIT_INFEASIBLE);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 1,
                field: "N".into(),
                message: String::new()
            }),
            EXIT_INVALID
        );
        assert_eq!(exit_code(&Error::NonConvergence("x".into())), 1);
    }

    #[test]
    fn bad_arguments_exit_two() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with(
            [
                "timely-pir",
                "simulate",
                "x.cfg",
                "--seed",
                "abc",
                "--alloc",
                "1,2",
            ],
            &mut o,
            &mut e,
        );
        assert_eq!(code, EXIT_INVALID);
        let code = main_with(
            ["timely-pir", "solve", "x.cfg", "--metric", "mean"],
            &mut o,
            &mut e,
        );
        assert_eq!(code, EXIT_INVALID);
    }
}

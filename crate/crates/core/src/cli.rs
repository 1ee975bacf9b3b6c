//! Command-line harness: `run1d`, `run2d`, `sweep` and `check`.
//!
//! Runs write a per-iteration CSV and a JSON summary into the output
//! directory. Reals are printed with 17 significant digits so that files
//! round-trip exactly and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    default_iteration_constant, detect_plateau, error_metrics, fit_geometric_rate, fit_power_rate,
    fitted_discretization_constant, optimal_iteration_count, total_error_bound, RateFit,
};
use crate::benchmarks::{Benchmark, BenchmarkSetup};
use crate::checks;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::linsolve::SorSettings;
use crate::pi::{run_policy_iteration, InitialPolicy, PIConfig, PIReport, StopReason};

/// Iterates sampled on the 2D slices, besides the final one.
pub const SLICE_ITERATES: [usize; 4] = [0, 5, 15, 30];

/// Environment variable capping the number of concurrent sweep runs.
pub const THREADS_ENV: &str = "HJB_PI_THREADS";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    pub lambda: f64,
    pub half_width: f64,
    pub h: f64,
    pub iterations: usize,
    pub theta: f64,
    pub a_max: f64,
    pub initial_policy: InitialPolicy,
    pub outer_tolerance: Option<f64>,
    pub sor: SorSettings,
    pub out_dir: PathBuf,
    /// Slice positions `(x0, y0)`; 2D only.
    pub slices: Option<(f64, f64)>,
}

impl RunConfig {
    pub fn run1d() -> Self {
        Self {
            benchmark: Benchmark::Lq1d,
            lambda: 1.0,
            half_width: 3.0,
            h: 0.03,
            iterations: 50,
            theta: 1.0,
            a_max: 6.0,
            initial_policy: InitialPolicy::Zero,
            outer_tolerance: None,
            sor: SorSettings::default(),
            out_dir: PathBuf::from("out"),
            slices: None,
        }
    }

    pub fn run2d() -> Self {
        Self {
            benchmark: Benchmark::Manufactured2d,
            lambda: 1.0,
            half_width: 2.0,
            h: 0.05,
            iterations: 60,
            theta: 0.18,
            a_max: 2.0,
            initial_policy: InitialPolicy::Adversarial2d,
            outer_tolerance: None,
            sor: SorSettings::default(),
            out_dir: PathBuf::from("out"),
            slices: Some((0.80, -0.80)),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("half-width", self.half_width),
            ("h", self.h),
            ("theta", self.theta),
            ("a-max", self.a_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }

    fn pi_config(&self, record_iterates: bool) -> PIConfig {
        PIConfig {
            max_outer_iterations: self.iterations,
            relaxation_theta: self.theta,
            initial_policy: self.initial_policy,
            outer_tolerance: self.outer_tolerance,
            sor: self.sor,
            record_iterates,
        }
    }

    fn stem(&self) -> &'static str {
        match self.benchmark {
            Benchmark::Lq1d => "run1d",
            Benchmark::Manufactured2d => "run2d",
        }
    }
}

/// Everything a run produces, already serialized.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory_csv: String,
    pub summary: serde_json::Value,
    /// `(file name, contents)` of extra CSV files.
    pub extra_files: Vec<(String, String)>,
    pub report: PIReport,
}

pub fn trajectory_csv(report: &PIReport) -> String {
    let mut out = String::from("iter,linf_error,l2_error,residual_l2,monotonicity_violation\n");
    for r in &report.records {
        let opt = |v: Option<f64>| v.map(real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            opt(r.linf_error),
            opt(r.l2_error),
            real(r.residual_l2),
            real(r.monotonicity_violation)
        );
    }
    out
}

/// Values along `x = x0` (axis `fixed = 0`) or `y = y0` (`fixed = 1`) for
/// the listed iterates and the reference.
fn slice_csv(setup: &BenchmarkSetup, report: &PIReport, fixed: usize, at: f64) -> Result<String> {
    let grid = setup.grid;
    let n = grid.nodes_per_axis();
    let anchor = match fixed {
        0 => [at, 0.0],
        _ => [0.0, at],
    };
    let node = grid.node(grid.nearest_node(&anchor)?);
    let fixed_index = node.axis(fixed);
    let free = 1 - fixed;
    let last = report.iterates.len() - 1;
    let mut columns: Vec<(String, &GridField)> = SLICE_ITERATES
        .iter()
        .filter(|&&i| i < last)
        .map(|&i| (format!("v_{i}"), &report.iterates[i]))
        .collect();
    columns.push((format!("v_{last}"), &report.iterates[last]));
    columns.push(("reference".into(), &setup.reference));

    let free_name = if free == 0 { "x" } else { "y" };
    let mut out = String::from(free_name);
    for (name, _) in &columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..n {
        let mut idx = [0usize; 2];
        idx[fixed] = fixed_index;
        idx[free] = i;
        let k = idx[0] * grid.stride(0) + idx[1] * grid.stride(1);
        out.push_str(&real(grid.axis_coord(i)));
        for (_, field) in &columns {
            out.push(',');
            out.push_str(&real(field.get(k)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Runs one benchmark and serializes its artifacts without touching disk.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let setup = BenchmarkSetup::new(cfg.benchmark, cfg.lambda, cfg.half_width, cfg.h, cfg.a_max)?;
    let warnings = setup.problem.assumption_warnings(&setup.grid);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let record = cfg.slices.is_some();
    let report = run_policy_iteration(
        &setup.problem,
        &setup.params,
        &setup.boundary,
        &cfg.pi_config(record),
        Some(&setup.reference),
    )?;

    let mut extra_files = Vec::new();
    if let Some((x0, y0)) = cfg.slices {
        if setup.grid.dim() != 2 {
            return Err(Error::InvalidParameter("slices need a 2D benchmark".into()));
        }
        extra_files.push((
            format!("{}_slice_x.csv", cfg.stem()),
            slice_csv(&setup, &report, 0, x0)?,
        ));
        extra_files.push((
            format!("{}_slice_y.csv", cfg.stem()),
            slice_csv(&setup, &report, 1, y0)?,
        ));
    }

    let errors = report.linf_errors();
    let residuals: Vec<f64> = report
        .records
        .iter()
        .skip(1)
        .map(|r| r.residual_linf)
        .collect();
    let params = &setup.params;
    let c1 = default_iteration_constant(setup.cost_sup_norm(), cfg.lambda);
    let last = report.records.last().expect("at least one iteration");
    let summary = json!({
        "config": cfg,
        "viscosity": params.viscosity(),
        "contraction_factor": params.contraction_factor(),
        "nodes_per_axis": setup.grid.nodes_per_axis(),
        "iterations": report.iterations(),
        "stop_reason": match report.stop_reason {
            StopReason::Converged => "converged",
            StopReason::IterationBudget => "iteration_budget",
        },
        "initial_linf_error": errors.first(),
        "final_linf_error": last.linf_error,
        "final_l2_error": last.l2_error,
        "max_monotonicity_violation": report.max_monotonicity_violation(),
        "residual_rate": fit_geometric_rate(&residuals).ok(),
        "error_rate": fit_geometric_rate(&errors).ok(),
        "plateau_start": detect_plateau(&errors, 10, 0.01),
        "iteration_constant": c1,
        "iteration_term": total_error_bound(c1, 0.0, report.iterations(), cfg.h, cfg.lambda, setup.grid.dim(), params.viscosity())?.iteration_term,
        "inner_iterations": report.records.iter().map(|r| r.solve.iterations).collect::<Vec<_>>(),
        "warnings": warnings,
    });
    Ok(RunOutput {
        trajectory_csv: trajectory_csv(&report),
        summary,
        extra_files,
        report,
    })
}

fn write_outputs(
    dir: &Path,
    stem: &str,
    csv: &str,
    summary: &serde_json::Value,
    extra: &[(String, String)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let mut json = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join(format!("{stem}.json")), json)?;
    for (name, body) in extra {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub benchmark: Benchmark,
    pub lambda: f64,
    pub half_width: f64,
    pub a_max: f64,
    pub h_values: Vec<f64>,
    /// Upper limit on the balanced iteration count per mesh.
    pub iteration_cap: usize,
    pub theta: f64,
    pub initial_policy: InitialPolicy,
    pub outer_tolerance: f64,
    pub sor: SorSettings,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl SweepConfig {
    pub fn lq1d() -> Self {
        Self {
            benchmark: Benchmark::Lq1d,
            lambda: 1.0,
            half_width: 3.0,
            a_max: 6.0,
            h_values: vec![0.2, 0.1, 0.05, 0.025],
            iteration_cap: 1000,
            theta: 1.0,
            initial_policy: InitialPolicy::Zero,
            outer_tolerance: 1e-12,
            sor: SorSettings::default(),
            threads: threads_from_env(),
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn manufactured2d() -> Self {
        Self {
            benchmark: Benchmark::Manufactured2d,
            half_width: 2.0,
            a_max: 2.0,
            h_values: vec![0.2, 0.1, 0.05],
            initial_policy: InitialPolicy::Adversarial2d,
            ..Self::lq1d()
        }
    }

    pub fn for_benchmark(benchmark: Benchmark) -> Self {
        match benchmark {
            Benchmark::Lq1d => Self::lq1d(),
            Benchmark::Manufactured2d => Self::manufactured2d(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub viscosity: f64,
    pub iteration_budget: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub linf_error: f64,
    pub l2_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub power_fit: Option<RateFit>,
    /// Smallest `C2` with `error <= C2 sqrt(h)` on every swept mesh.
    pub fitted_c2: f64,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("h,n_iterations,linf_error,l2_error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                real(r.h),
                r.n_iterations,
                real(r.linf_error),
                real(r.l2_error)
            );
        }
        out
    }
}

/// `HJB_PI_THREADS`, defaulting to one thread.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn sweep_one(cfg: &SweepConfig, h: f64) -> Result<SweepRow> {
    let setup = BenchmarkSetup::new(cfg.benchmark, cfg.lambda, cfg.half_width, h, cfg.a_max)?;
    let n = setup.params.viscosity();
    let budget =
        optimal_iteration_count(h, cfg.lambda, setup.grid.dim(), n)?.min(cfg.iteration_cap);
    let pi = PIConfig {
        max_outer_iterations: budget,
        relaxation_theta: cfg.theta,
        initial_policy: cfg.initial_policy,
        outer_tolerance: Some(cfg.outer_tolerance),
        sor: cfg.sor,
        record_iterates: false,
    };
    let report = run_policy_iteration(
        &setup.problem,
        &setup.params,
        &setup.boundary,
        &pi,
        Some(&setup.reference),
    )?;
    let (linf_error, l2_error) = error_metrics(&report.final_value, &setup.reference)?;
    Ok(SweepRow {
        h,
        viscosity: n,
        iteration_budget: budget,
        n_iterations: report.iterations(),
        converged: report.stop_reason == StopReason::Converged,
        linf_error,
        l2_error,
    })
}

/// Runs every mesh of the sweep, at most `cfg.threads` at a time. Rows come
/// back in the configured order.
pub fn execute_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.h_values.is_empty() {
        return Err(Error::InvalidParameter("empty mesh list".into()));
    }
    if cfg.h_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "mesh sizes must be strictly decreasing".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cfg.h_values
            .par_iter()
            .map(|&h| sweep_one(cfg, h))
            .collect::<Result<Vec<_>>>()
    })?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.linf_error).collect();
    Ok(SweepReport {
        power_fit: fit_power_rate(&h, &e).ok(),
        fitted_c2: fitted_discretization_constant(&h, &e),
        rows,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "hjb-pi",
    version,
    about = "Policy iteration for discounted HJB equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 1D linear-quadratic benchmark
    Run1d(RunArgs),
    /// 2D manufactured benchmark with slice profiles
    Run2d(Run2dArgs),
    /// Mesh sweep with the balanced iteration count per mesh
    Sweep(SweepArgs),
    /// Run the invariant and property suite
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Weight of the greedy policy in the update; 1 is plain policy iteration
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    /// zero | adversarial2d
    #[arg(long)]
    pub init: Option<InitialPolicy>,
    /// Stop early once the sup-norm value update falls below this
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long, default_value_t = 1.7)]
    pub omega: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub sor_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub sor_max_iter: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct Run2dArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0.80, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = -0.80, allow_negative_numbers = true)]
    pub y0: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// lq1d | manufactured2d
    #[arg(long, default_value = "lq1d")]
    pub benchmark: Benchmark,
    /// Comma-separated, strictly decreasing mesh sizes
    #[arg(long, value_delimiter = ',')]
    pub h: Option<Vec<f64>>,
    /// Cap on the balanced iteration count
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub init: Option<InitialPolicy>,
    #[arg(long, default_value_t = 1e-12)]
    pub outer_tol: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Run only these checks
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// List the checks and exit
    #[arg(long)]
    pub list: bool,
}

fn apply_run_args(mut cfg: RunConfig, a: RunArgs) -> RunConfig {
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.half_width = a.half_width.unwrap_or(cfg.half_width);
    cfg.h = a.h.unwrap_or(cfg.h);
    cfg.iterations = a.iterations.unwrap_or(cfg.iterations);
    cfg.theta = a.theta.unwrap_or(cfg.theta);
    cfg.a_max = a.a_max.unwrap_or(cfg.a_max);
    cfg.initial_policy = a.init.unwrap_or(cfg.initial_policy);
    cfg.outer_tolerance = a.outer_tol.or(cfg.outer_tolerance);
    cfg.sor = SorSettings {
        omega: a.omega,
        tol: a.sor_tol,
        max_iter: a.sor_max_iter,
    };
    cfg.out_dir = a.out_dir;
    cfg
}

fn run_command(cfg: RunConfig) -> Result<()> {
    let out = execute_run(&cfg)?;
    write_outputs(
        &cfg.out_dir,
        cfg.stem(),
        &out.trajectory_csv,
        &out.summary,
        &out.extra_files,
    )?;
    let last = out.report.records.last().expect("at least one iteration");
    println!(
        "{}: {} iterations, final sup error {:.6e}, N = {}, beta_h = {:.6}",
        cfg.benchmark,
        out.report.iterations(),
        last.linf_error.unwrap_or(f64::NAN),
        out.summary["viscosity"],
        out.summary["contraction_factor"]
            .as_f64()
            .unwrap_or(f64::NAN)
    );
    Ok(())
}

fn sweep_command(a: SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::for_benchmark(a.benchmark);
    if let Some(h) = a.h {
        cfg.h_values = h;
    }
    cfg.iteration_cap = a.max_iterations;
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.half_width = a.half_width.unwrap_or(cfg.half_width);
    cfg.a_max = a.a_max.unwrap_or(cfg.a_max);
    cfg.theta = a.theta.unwrap_or(cfg.theta);
    cfg.initial_policy = a.init.unwrap_or(cfg.initial_policy);
    cfg.outer_tolerance = a.outer_tol;
    cfg.out_dir = a.out_dir;
    let report = execute_sweep(&cfg)?;
    let summary = json!({
        "config": cfg,
        "rows": report.rows,
        "power_fit": report.power_fit,
        "fitted_c2": report.fitted_c2,
        "c2_note": "fitted from this sweep",
    });
    write_outputs(&cfg.out_dir, "sweep", &report.csv(), &summary, &[])?;
    match report.power_fit {
        Some(fit) => println!(
            "observed order {:.4} (r^2 {:.4}), fitted C2 {:.6e}",
            fit.slope, fit.r_squared, report.fitted_c2
        ),
        None => println!("too few usable meshes for a rate fit"),
    }
    Ok(())
}

fn check_command(a: CheckArgs) -> Result<bool> {
    let suite = checks::suite();
    if a.list {
        for c in &suite {
            println!("{:<26} {}", c.id, c.title);
        }
        return Ok(true);
    }
    let selected: Vec<_> = match &a.only {
        Some(ids) => {
            let mut out = Vec::new();
            for id in ids {
                out.push(checks::find(id).ok_or_else(|| Error::UnknownName(id.clone()))?);
            }
            out
        }
        None => suite,
    };
    let mut all = true;
    for c in &selected {
        let outcome = checks::run_check(c);
        println!("{}", outcome.line());
        all &= outcome.passed;
    }
    Ok(all)
}

/// Parses `std::env::args` and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run1d(a) => run_command(apply_run_args(RunConfig::run1d(), a)).map(|_| true),
        Command::Run2d(a) => {
            let mut cfg = apply_run_args(RunConfig::run2d(), a.run);
            cfg.slices = Some((a.x0, a.y0));
            run_command(cfg).map(|_| true)
        }
        Command::Sweep(a) => sweep_command(a).map(|_| true),
        Command::Check(a) => check_command(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn threads_default_to_one() {
        if std::env::var(THREADS_ENV).is_err() {
            assert_eq!(threads_from_env(), 1);
        }
    }

    #[test]
    fn cli_parses_defaults_and_lists() {
        let cli = Cli::try_parse_from(["hjb-pi", "sweep", "--h", "0.2,0.1,0.05"]).unwrap();
        let Command::Sweep(s) = cli.command else {
            panic!()
        };
        assert_eq!(s.h.unwrap(), vec![0.2, 0.1, 0.05]);
        assert_eq!(s.benchmark, Benchmark::Lq1d);
        let cli = Cli::try_parse_from(["hjb-pi", "run2d", "--y0", "-0.5"]).unwrap();
        let Command::Run2d(r) = cli.command else {
            panic!()
        };
        assert_eq!(r.y0, -0.5);
        assert!(Cli::try_parse_from(["hjb-pi", "run1d", "--init", "bogus"]).is_err());
    }

    #[test]
    fn small_run_csv_shape() {
        let cfg = RunConfig {
            h: 0.2,
            iterations: 5,
            ..RunConfig::run1d()
        };
        let out = execute_run(&cfg).unwrap();
        let lines: Vec<&str> = out.trajectory_csv.lines().collect();
        assert_eq!(
            lines[0],
            "iter,linf_error,l2_error,residual_l2,monotonicity_violation"
        );
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,"));
        assert_eq!(out.summary["config"]["h"], 0.2);
    }

    #[test]
    fn coarse_2d_run_writes_slices() {
        let cfg = RunConfig {
            h: 0.4,
            iterations: 8,
            ..RunConfig::run2d()
        };
        let out = execute_run(&cfg).unwrap();
        assert_eq!(out.extra_files.len(), 2);
        let (_, x_slice) = &out.extra_files[0];
        let header = x_slice.lines().next().unwrap();
        assert_eq!(header, "y,v_0,v_5,v_7,reference");
        assert_eq!(x_slice.lines().count(), 1 + 11);
    }
}

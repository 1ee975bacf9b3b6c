//! The invariant and property suite behind `hjb-pi check`.
//!
//! Every check is deterministic: random inputs come from fixed ChaCha8
//! seeds. A check passes when its property holds and it finishes inside its
//! time budget.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{detect_plateau, error_metrics, fit_geometric_rate, fit_power_rate};
use crate::benchmarks::{lq_riccati_coefficient, BenchmarkSetup};
use crate::cli::{execute_run, execute_sweep, RunConfig, SweepConfig};
use crate::error::Result;
use crate::grid::{Grid, GridField, Vector};
use crate::linsolve::{
    solve_dense, solve_sor, solve_tridiagonal, SorSettings, StructuredSystem2D, TridiagonalSystem,
};
use crate::oracle::{fitted_quadratic_coefficient, lq_value_iteration, LqOracleSettings};
use crate::pi::{
    policy_improve, run_policy_iteration, InitialPolicy, PIConfig, PIReport, StopReason,
};
use crate::problem::PolicyField;
use crate::scheme::{bellman_residual, certify_monotone, resolvent_map, stencil_coefficients};

/// Outcome of a property body before timing is taken into account.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    pub budget: Duration,
    run: fn() -> Result<Verdict>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CheckOutcome {
    /// One status line, e.g. `PASS fixed-point-identity (0.01 s of 1 s): ...`.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.2} s of {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// All checks in a fixed order.
pub fn suite() -> Vec<Check> {
    vec![
        Check {
            id: "stencil-certification",
            title: "monotone stencil and row sums over sampled controls",
            budget: secs(5),
            run: stencil_certification,
        },
        Check {
            id: "fixed-point-identity",
            title: "F_h[U] = (lambda + 2dN/h)(U - TU)",
            budget: secs(1),
            run: fixed_point_identity,
        },
        Check {
            id: "resolvent-contraction",
            title: "|TU - TW| <= beta_h |U - W|",
            budget: secs(1),
            run: resolvent_contraction,
        },
        Check {
            id: "geometric-envelope",
            title: "greedy iterates stay inside beta_h^n envelope",
            budget: secs(5),
            run: geometric_envelope,
        },
        Check {
            id: "monotone-decrease",
            title: "greedy iterates decrease pointwise",
            budget: secs(60),
            run: monotone_decrease,
        },
        Check {
            id: "uniform-bound",
            title: "|V_n| <= max(|c_n|/lambda, |g|)",
            budget: secs(60),
            run: uniform_bound,
        },
        Check {
            id: "manufactured-exactness",
            title: "manufactured value is a discrete fixed point",
            budget: secs(1),
            run: manufactured_exactness,
        },
        Check {
            id: "solver-oracles",
            title: "Thomas and SOR against dense elimination",
            budget: secs(5),
            run: solver_oracles,
        },
        Check {
            id: "viscosity-rate",
            title: "LQ mesh sweep order at least 0.45",
            budget: secs(120),
            run: viscosity_rate,
        },
        Check {
            id: "decay-then-plateau",
            title: "1D error plateaus at the discretization floor",
            budget: secs(60),
            run: decay_then_plateau,
        },
        Check {
            id: "manufactured-relaxed",
            title: "relaxed 2D run decreases and gains two digits",
            budget: secs(600),
            run: manufactured_relaxed,
        },
        Check {
            id: "lq-oracle",
            title: "value iteration selects the positive Riccati root",
            budget: secs(60),
            run: lq_oracle,
        },
        Check {
            id: "determinism",
            title: "repeated 1D runs give identical CSV",
            budget: secs(10),
            run: determinism,
        },
        Check {
            id: "policy-shift",
            title: "|a_(n+1) - a_h| <= (d/h) |V_n - V_h|",
            budget: secs(5),
            run: policy_shift,
        },
        Check {
            id: "fixed-point-certificate",
            title: "Bellman residual at termination",
            budget: secs(5),
            run: fixed_point_certificate,
        },
        Check {
            id: "geometric-rate",
            title: "fitted residual factor at most beta_h + 0.01",
            budget: secs(5),
            run: geometric_rate,
        },
    ]
}

pub fn find(id: &str) -> Option<Check> {
    suite().into_iter().find(|c| c.id == id)
}

pub fn run_check(check: &Check) -> CheckOutcome {
    let start = Instant::now();
    let verdict = (check.run)().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
    let elapsed = start.elapsed();
    let in_time = elapsed <= check.budget;
    let detail = if in_time {
        verdict.detail
    } else {
        format!("{}; over time budget", verdict.detail)
    };
    CheckOutcome {
        id: check.id,
        title: check.title,
        passed: verdict.passed && in_time,
        detail,
        elapsed,
        budget: check.budget,
    }
}

fn lq_default() -> Result<BenchmarkSetup> {
    BenchmarkSetup::lq1d(1.0, 3.0, 0.03, 6.0)
}

fn lq_coarse() -> Result<BenchmarkSetup> {
    BenchmarkSetup::lq1d(1.0, 3.0, 0.2, 6.0)
}

fn manufactured_default() -> Result<BenchmarkSetup> {
    BenchmarkSetup::manufactured2d(1.0, 2.0, 0.05, 2.0)
}

fn greedy(iterations: usize, initial_policy: InitialPolicy) -> PIConfig {
    PIConfig {
        max_outer_iterations: iterations,
        relaxation_theta: 1.0,
        initial_policy,
        record_iterates: true,
        ..PIConfig::default()
    }
}

fn converged(setup: &BenchmarkSetup, initial_policy: InitialPolicy) -> Result<PIReport> {
    let cfg = PIConfig {
        outer_tolerance: Some(1e-12),
        ..greedy(200, initial_policy)
    };
    run_policy_iteration(
        &setup.problem,
        &setup.params,
        &setup.boundary,
        &cfg,
        Some(&setup.reference),
    )
}

fn sup_diff(a: &GridField, b: &GridField) -> Result<f64> {
    Ok(error_metrics(a, b)?.0)
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, scale: f64) -> GridField {
    let values = (0..grid.len())
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    GridField::from_values(grid, values).expect("finite samples")
}

/// Random `|sub| + |sup| < diag` tridiagonal system of size `n`.
pub fn random_dominant_tridiagonal(rng: &mut ChaCha8Rng, n: usize) -> TridiagonalSystem {
    let sub: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sup: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let diag = (0..n)
        .map(|i| sub[i].abs() + sup[i].abs() + rng.gen_range(0.1..2.0))
        .collect();
    let rhs = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    TridiagonalSystem {
        sub,
        diag,
        sup,
        rhs,
    }
}

/// Random five-point M-matrix shaped like a viscous evaluation system on an
/// `m x m` interior: uniform diffusion weight, random transport with cell
/// Peclet number at most one half, and a positive diagonal margin.
pub fn random_viscous_system(rng: &mut ChaCha8Rng, m: usize) -> StructuredSystem2D {
    let len = m * m;
    let w = rng.gen_range(1.0..50.0);
    let margin = rng.gen_range(0.1..2.0);
    let mut sys = StructuredSystem2D {
        m,
        center: vec![4.0 * w + margin; len],
        minus: [vec![0.0; len], vec![0.0; len]],
        plus: [vec![0.0; len], vec![0.0; len]],
        rhs: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    for i in 0..m {
        for j in 0..m {
            let r = i * m + j;
            let local = [i, j];
            for axis in 0..2 {
                let t = rng.gen_range(-0.5..0.5);
                if local[axis] > 0 {
                    sys.minus[axis][r] = -w * (1.0 - t);
                }
                if local[axis] + 1 < m {
                    sys.plus[axis][r] = -w * (1.0 + t);
                }
            }
        }
    }
    sys
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn stencil_certification() -> Result<Verdict> {
    const SAMPLES: usize = 10_000;
    let mut worst_neighbor = f64::NEG_INFINITY;
    let mut worst_sum: f64 = 0.0;
    let mut failures = 0usize;
    for setup in [lq_default()?, manufactured_default()?] {
        certify_monotone(&setup.problem, &setup.params, &setup.grid)?;
        let grid = setup.grid;
        let d = grid.dim();
        let a_max = setup.problem.a_max();
        let lambda = setup.params.lambda();
        let nodes: Vec<usize> = grid.interior_nodes().collect();
        let per_node: Vec<(f64, f64, usize)> = nodes
            .par_iter()
            .map(|&k| {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + k as u64);
                let b = setup.problem.drift_base(&grid.coord(k));
                let mut neighbor = f64::NEG_INFINITY;
                let mut sum_dev: f64 = 0.0;
                let mut bad = 0;
                for s in 0..SAMPLES {
                    // the first samples are the box corners
                    let mut f = Vector::new();
                    for (i, bi) in b.iter().enumerate() {
                        let a = if s < 1 << d {
                            if s >> i & 1 == 1 {
                                a_max
                            } else {
                                -a_max
                            }
                        } else {
                            a_max * (2.0 * rng.gen::<f64>() - 1.0)
                        };
                        f.push(bi + a);
                    }
                    match stencil_coefficients(&setup.params, &f) {
                        Ok(st) => {
                            neighbor = neighbor.max(st.max_neighbor());
                            sum_dev = sum_dev.max((st.row_sum() - lambda).abs());
                        }
                        Err(_) => bad += 1,
                    }
                }
                (neighbor, sum_dev, bad)
            })
            .collect();
        for (n, s, b) in per_node {
            worst_neighbor = worst_neighbor.max(n);
            worst_sum = worst_sum.max(s);
            failures += b;
        }
    }
    Ok(Verdict::new(
        failures == 0 && worst_neighbor <= 0.0 && worst_sum <= 1e-12,
        format!(
            "max neighbor weight {worst_neighbor:.3e}, max row-sum deviation {worst_sum:.3e}, {failures} rejected"
        ),
    ))
}

fn fixed_point_identity() -> Result<Verdict> {
    let setup = BenchmarkSetup::lq1d(1.0, 3.0, 0.1, 6.0)?;
    let center = setup.params.center();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u = random_field(&setup.grid, &mut rng, 5.0);
        let f = bellman_residual(&setup.problem, &setup.params, &u)?;
        let t = resolvent_map(&setup.problem, &setup.params, &u, None)?;
        let scale = 1.0 + u.max_abs();
        for k in setup.grid.interior_nodes() {
            let dev = (f.get(k) - center * (u.get(k) - t.get(k))).abs();
            worst = worst.max(dev / scale);
        }
    }
    Ok(Verdict::new(
        worst <= 1e-12,
        format!("max relative deviation {worst:.3e}"),
    ))
}

fn resolvent_contraction() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    let mut betas = Vec::new();
    for setup in [
        BenchmarkSetup::lq1d(1.0, 3.0, 0.1, 6.0)?,
        BenchmarkSetup::manufactured2d(1.0, 2.0, 0.2, 2.0)?,
    ] {
        let beta = setup.params.contraction_factor();
        betas.push(beta);
        for _ in 0..10 {
            // pairs share Dirichlet data, as every pair of iterates does
            let u = random_field(&setup.grid, &mut rng, 5.0).with_boundary_of(&setup.boundary)?;
            let w = random_field(&setup.grid, &mut rng, 5.0).with_boundary_of(&setup.boundary)?;
            let tu = resolvent_map(&setup.problem, &setup.params, &u, None)?;
            let tw = resolvent_map(&setup.problem, &setup.params, &w, None)?;
            let slack = sup_diff(&tu, &tw)? - beta * sup_diff(&u, &w)?;
            worst = worst.max(slack);
        }
    }
    Ok(Verdict::new(
        worst <= 1e-12,
        format!("beta_h = {betas:.6?}, max |TU-TW| - beta |U-W| = {worst:.3e}"),
    ))
}

fn geometric_envelope() -> Result<Verdict> {
    let setup = lq_coarse()?;
    let report = converged(&setup, InitialPolicy::Zero)?;
    if report.stop_reason != StopReason::Converged {
        return Ok(Verdict::new(false, "fixed point not reached"));
    }
    let vh = &report.final_value;
    let beta = setup.params.contraction_factor();
    let e0 = sup_diff(&report.iterates[0], vh)?;
    let mut worst = f64::NEG_INFINITY;
    for (n, v) in report.iterates.iter().enumerate() {
        let slack = sup_diff(v, vh)? - beta.powi(n as i32) * e0 - 1e-8;
        worst = worst.max(slack);
    }
    Ok(Verdict::new(
        worst <= 0.0,
        format!(
            "beta_h = {beta:.6}, {} iterates, max excess over envelope {worst:.3e}",
            report.iterates.len()
        ),
    ))
}

/// Largest `V_(n+1) - V_n` over interior nodes and all steps.
fn max_increase(report: &PIReport) -> f64 {
    report.max_monotonicity_violation()
}

fn greedy_runs() -> Result<Vec<(&'static str, BenchmarkSetup, PIReport)>> {
    let lq = lq_default()?;
    let lq_report = run_policy_iteration(
        &lq.problem,
        &lq.params,
        &lq.boundary,
        &greedy(50, InitialPolicy::Zero),
        Some(&lq.reference),
    )?;
    let mf = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.1, 2.0)?;
    let mf_report = run_policy_iteration(
        &mf.problem,
        &mf.params,
        &mf.boundary,
        &greedy(30, InitialPolicy::Adversarial2d),
        Some(&mf.reference),
    )?;
    Ok(vec![
        ("lq1d", lq, lq_report),
        ("manufactured2d", mf, mf_report),
    ])
}

fn monotone_decrease() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, _, report) in greedy_runs()? {
        let inc = max_increase(&report);
        pass &= inc <= 1e-8 && report.records.len() == report.iterates.len();
        parts.push(format!(
            "{name}: max increase {inc:.3e} over {} steps",
            report.records.len()
        ));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

/// `max(|c_alpha|_inf / lambda, |g|_inf)` minus `|V|_inf`, minimized over
/// the iterates of a greedy run; the policy of step `n` is rebuilt from
/// `V_(n-1)`.
fn bound_margin(setup: &BenchmarkSetup, report: &PIReport, initial: InitialPolicy) -> Result<f64> {
    let grid = setup.grid;
    let lambda = setup.problem.lambda();
    let g = setup.boundary.max_abs_boundary();
    let mut policy = crate::pi::initial_policy(initial, &grid, &setup.problem)?;
    let mut margin = f64::INFINITY;
    for v in &report.iterates {
        let c = grid
            .interior_nodes()
            .map(|k| {
                setup
                    .problem
                    .running_cost(&grid, k, policy.control(k))
                    .abs()
            })
            .fold(0.0, f64::max);
        margin = margin.min((c / lambda).max(g) - v.max_abs());
        policy = policy_improve(&setup.problem, v, &policy, 1.0)?;
    }
    Ok(margin)
}

fn uniform_bound() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    let coarse = lq_coarse()?;
    let coarse_report = converged(&coarse, InitialPolicy::Zero)?;
    let runs = std::iter::once(("lq1d h=0.2", coarse, coarse_report, InitialPolicy::Zero)).chain(
        greedy_runs()?.into_iter().map(|(name, s, r)| {
            let init = if name == "lq1d" {
                InitialPolicy::Zero
            } else {
                InitialPolicy::Adversarial2d
            };
            (name, s, r, init)
        }),
    );
    for (name, setup, report, init) in runs {
        let margin = bound_margin(&setup, &report, init)?;
        pass &= margin >= -1e-9;
        parts.push(format!("{name}: min margin {margin:.3e}"));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn manufactured_exactness() -> Result<Verdict> {
    let setup = manufactured_default()?;
    let r = bellman_residual(&setup.problem, &setup.params, &setup.reference)?;
    let worst = r.max_abs();
    Ok(Verdict::new(
        worst <= 1e-11 && setup.grid.nodes_per_axis() == 81,
        format!(
            "max |F_h[V*]| = {worst:.3e} on {0}x{0} nodes",
            setup.grid.nodes_per_axis()
        ),
    ))
}

fn solver_oracles() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut thomas: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=50);
        let sys = random_dominant_tridiagonal(&mut rng, n);
        let x = solve_tridiagonal(&sys)?;
        let y = solve_dense(sys.to_dense(), sys.rhs.clone())?;
        thomas = thomas.max(max_dev(&x, &y));
    }
    let settings = SorSettings::default();
    let mut sor: f64 = 0.0;
    let mut all_converged = true;
    for _ in 0..20 {
        let m = rng.gen_range(2..=9);
        let sys = random_viscous_system(&mut rng, m);
        let (x, stats) = solve_sor(&sys, &settings, &vec![0.0; sys.len()])?;
        all_converged &= stats.converged;
        let y = solve_dense(sys.to_dense(), sys.rhs.clone())?;
        sor = sor.max(max_dev(&x, &y));
    }
    Ok(Verdict::new(
        thomas <= 1e-10 && sor <= 1e-8 && all_converged,
        format!("Thomas max deviation {thomas:.3e}, SOR max deviation {sor:.3e}"),
    ))
}

fn viscosity_rate() -> Result<Verdict> {
    let cfg = SweepConfig {
        h_values: vec![0.2, 0.1, 0.05, 0.025],
        ..SweepConfig::lq1d()
    };
    let report = execute_sweep(&cfg)?;
    let all_converged = report.rows.iter().all(|r| r.converged);
    let h: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = report.rows.iter().map(|r| r.linf_error).collect();
    let fit = fit_power_rate(&h, &e)?;
    Ok(Verdict::new(
        all_converged && fit.slope >= 0.45,
        format!(
            "slope {:.4} (r^2 {:.4}), errors [{}]",
            fit.slope,
            fit.r_squared,
            e.iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn decay_then_plateau() -> Result<Verdict> {
    let setup = lq_default()?;
    let run = run_policy_iteration(
        &setup.problem,
        &setup.params,
        &setup.boundary,
        &greedy(50, InitialPolicy::Zero),
        Some(&setup.reference),
    )?;
    let errors = run.linf_errors();
    let fixed = converged(&setup, InitialPolicy::Zero)?;
    let floor = sup_diff(&fixed.final_value, &setup.reference)?;
    let Some(start) = detect_plateau(&errors, 10, 0.01) else {
        return Ok(Verdict::new(
            false,
            format!("no plateau in {} errors", errors.len()),
        ));
    };
    let level = errors[errors.len() - 1];
    let rel = (level - floor).abs() / floor;
    Ok(Verdict::new(
        rel <= 0.05,
        format!("plateau from n = {start} at {level:.6e}, |V_h - V| = {floor:.6e}, relative gap {rel:.2e}"),
    ))
}

fn manufactured_relaxed() -> Result<Verdict> {
    let setup = manufactured_default()?;
    let cfg = PIConfig {
        max_outer_iterations: 60,
        relaxation_theta: 0.18,
        initial_policy: InitialPolicy::Adversarial2d,
        ..PIConfig::default()
    };
    let report = run_policy_iteration(
        &setup.problem,
        &setup.params,
        &setup.boundary,
        &cfg,
        Some(&setup.reference),
    )?;
    let e = report.linf_errors();
    let worst_rise = e
        .windows(2)
        .skip(3)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let first = e[0];
    let last = e[e.len() - 1];
    let gain = first / last;
    Ok(Verdict::new(
        e.len() == 60 && worst_rise <= 1e-9 && gain >= 100.0,
        format!(
            "error {first:.3e} -> {last:.3e} (factor {gain:.3e}), max rise after n=3 {worst_rise:.3e}"
        ),
    ))
}

fn lq_oracle() -> Result<Verdict> {
    let settings = LqOracleSettings::default();
    let r = lq_value_iteration(&settings)?;
    let p = fitted_quadratic_coefficient(&r.xs, &r.values, 2.0)?;
    let lambda = settings.lambda;
    let positive = lq_riccati_coefficient(lambda)?;
    let other = (lambda + (lambda * lambda + 4.0).sqrt()) / 2.0;
    let near = (p - 0.618034).abs() / 0.618034;
    let far = (p - other).abs() / other;
    Ok(Verdict::new(
        r.final_update <= settings.tol
            && near <= 0.01
            && far > 0.10
            && (positive - 0.618034).abs() < 1e-6,
        format!(
            "fitted P = {p:.6} after {} sweeps; {:.2}% from 0.618034, {:.1}% from {other:.6}",
            r.sweeps,
            100.0 * near,
            100.0 * far
        ),
    ))
}

fn determinism() -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("hjb-pi-determinism-{}", std::process::id()));
    let mut cfg = RunConfig::run1d();
    cfg.out_dir = dir.clone();
    let a = execute_run(&cfg)?.trajectory_csv;
    let b = execute_run(&cfg)?.trajectory_csv;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(Verdict::new(
        a == b && a.lines().count() == 51,
        format!("{} bytes, identical: {}", a.len(), a == b),
    ))
}

fn policy_shift() -> Result<Verdict> {
    let setup = lq_coarse()?;
    let report = converged(&setup, InitialPolicy::Zero)?;
    let vh = &report.final_value;
    let target = policy_improve(&setup.problem, vh, &PolicyField::zeros(&setup.grid), 1.0)?;
    let scale = setup.grid.dim() as f64 / setup.grid.h();
    let mut policy = PolicyField::zeros(&setup.grid);
    let mut worst = f64::NEG_INFINITY;
    for v in &report.iterates {
        policy = policy_improve(&setup.problem, v, &policy, 1.0)?;
        let slack = policy.distance(&target)? - scale * sup_diff(v, vh)?;
        worst = worst.max(slack);
    }
    Ok(Verdict::new(
        worst <= 1e-12,
        format!("max |a_(n+1) - a_h| - (d/h)|V_n - V_h| = {worst:.3e}"),
    ))
}

fn fixed_point_certificate() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for setup in [
        lq_coarse()?,
        BenchmarkSetup::manufactured2d(1.0, 2.0, 0.2, 2.0)?,
    ] {
        let init = if setup.grid.dim() == 1 {
            InitialPolicy::Zero
        } else {
            InitialPolicy::Adversarial2d
        };
        let report = converged(&setup, init)?;
        let r = bellman_residual(&setup.problem, &setup.params, &report.final_value)?.max_abs();
        let allowed = setup.params.center() * 1e-12 + 10.0 * SorSettings::default().tol;
        pass &= report.stop_reason == StopReason::Converged && r <= allowed;
        parts.push(format!(
            "{}: |F_h| = {r:.3e} (allowed {allowed:.3e}) after {} steps",
            setup.benchmark,
            report.iterations()
        ));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn geometric_rate() -> Result<Verdict> {
    let setup = lq_coarse()?;
    let report = converged(&setup, InitialPolicy::Zero)?;
    let residuals: Vec<f64> = report
        .records
        .iter()
        .skip(1)
        .map(|r| r.residual_linf)
        .collect();
    let fit = fit_geometric_rate(&residuals)?;
    let beta = setup.params.contraction_factor();
    Ok(Verdict::new(
        fit.factor() <= beta + 0.01,
        format!("measured factor {:.4}, beta_h = {beta:.4}", fit.factor()),
    ))
}

//! Howard policy iteration on the viscous scheme.
//!
//! Each outer step solves the linear problem `L_{alpha_n} V_n = 0` with
//! Dirichlet data and then improves the policy pointwise from the centered
//! gradient of `V_n`, optionally relaxed toward the previous policy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::error_metrics;
use crate::benchmarks::manufactured_samples;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Vector};
use crate::linsolve::{
    assemble_evaluation_system, solve_sor, solve_tridiagonal, EvaluationSystem, SolveStats,
    SorSettings,
};
use crate::problem::{ControlProblem, PolicyField};
use crate::scheme::SchemeParams;

/// Named initial policy generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPolicy {
    /// `a_0 = 0`.
    Zero,
    /// `clip(grad_h V* + 0.3 (sin(2x+1) cos y, cos x sin(2y-0.5)))`, i.e. the
    /// opposite of the manufactured feedback plus a smooth oscillation.
    Adversarial2d,
}

impl InitialPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            InitialPolicy::Zero => "zero",
            InitialPolicy::Adversarial2d => "adversarial2d",
        }
    }
}

impl fmt::Display for InitialPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitialPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitialPolicy::Zero),
            "adversarial2d" => Ok(InitialPolicy::Adversarial2d),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

pub fn initial_policy(
    kind: InitialPolicy,
    grid: &Grid,
    problem: &ControlProblem,
) -> Result<PolicyField> {
    match kind {
        InitialPolicy::Zero => Ok(PolicyField::zeros(grid)),
        InitialPolicy::Adversarial2d => {
            let v = manufactured_samples(grid)?;
            Ok(PolicyField::from_fn(grid, problem.a_max(), |k| {
                let x = grid.coord(k);
                let g = v.gradient_unchecked(k);
                let wobble = [
                    (2.0 * x[0] + 1.0).sin() * x[1].cos(),
                    x[0].cos() * (2.0 * x[1] - 0.5).sin(),
                ];
                [g[0] + 0.3 * wobble[0], g[1] + 0.3 * wobble[1]]
                    .into_iter()
                    .collect()
            }))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PIConfig {
    pub max_outer_iterations: usize,
    /// Weight of the greedy target in the policy update; 1 is plain PI.
    pub relaxation_theta: f64,
    pub initial_policy: InitialPolicy,
    /// Stop once `|V_n - V_{n-1}|_inf` falls below this; `None` runs the
    /// full iteration budget.
    pub outer_tolerance: Option<f64>,
    pub sor: SorSettings,
    /// Keep every value iterate in the report.
    pub record_iterates: bool,
}

impl Default for PIConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 50,
            relaxation_theta: 1.0,
            initial_policy: InitialPolicy::Zero,
            outer_tolerance: None,
            sor: SorSettings::default(),
            record_iterates: false,
        }
    }
}

impl PIConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation_theta > 0.0 && self.relaxation_theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation weight must lie in (0, 1], got {}",
                self.relaxation_theta
            )));
        }
        if let Some(t) = self.outer_tolerance {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "outer tolerance must be positive, got {t}"
                )));
            }
        }
        if !(self.sor.tol > 0.0) || self.sor.max_iter == 0 {
            return Err(Error::InvalidParameter("invalid SOR settings".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter(
                "need at least one outer iteration".into(),
            ));
        }
        Ok(())
    }

    pub fn is_greedy(&self) -> bool {
        self.relaxation_theta == 1.0
    }
}

/// One outer iteration. `residual_*` compare `V_n` with the previous
/// iterate; for `n = 0` the previous iterate is the boundary-extended zero
/// field used as the initial guess.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub linf_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub residual_l2: f64,
    pub residual_linf: f64,
    /// `max(0, max_k (V_n - V_{n-1})_k)` over interior nodes; zero for `n = 0`.
    pub monotonicity_violation: f64,
    pub solve: SolveStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    IterationBudget,
}

#[derive(Debug, Clone)]
pub struct PIReport {
    pub records: Vec<IterationRecord>,
    pub final_value: GridField,
    /// Greedy (or relaxed) policy computed from `final_value`.
    pub final_policy: PolicyField,
    /// `V_0, V_1, ...` when `record_iterates` is set.
    pub iterates: Vec<GridField>,
    pub stop_reason: StopReason,
}

impl PIReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn max_monotonicity_violation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.monotonicity_violation)
            .fold(0.0, f64::max)
    }

    pub fn linf_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.linf_error).collect()
    }
}

/// Solves `L_alpha V = 0` in the interior with `boundary` as Dirichlet data.
/// `warm` seeds the iterative 2D solver; it is ignored in 1D.
pub fn policy_evaluate(
    problem: &ControlProblem,
    params: &SchemeParams,
    policy: &PolicyField,
    boundary: &GridField,
    solver: &SorSettings,
    warm: Option<&GridField>,
) -> Result<(GridField, SolveStats)> {
    let grid = *boundary.grid();
    let system = assemble_evaluation_system(problem, params, policy, boundary)?;
    let (interior, stats) = match &system {
        EvaluationSystem::Tridiagonal(t) => (solve_tridiagonal(t)?, SolveStats::direct()),
        EvaluationSystem::Structured(s) => {
            let initial: Vec<f64> = match warm {
                Some(w) => {
                    w.same_grid(boundary)?;
                    grid.interior_nodes().map(|k| w.get(k)).collect()
                }
                None => vec![0.0; s.len()],
            };
            let (x, stats) = solve_sor(s, solver, &initial)?;
            if !stats.converged {
                return Err(Error::SolverDiverged {
                    iterations: stats.iterations,
                    update: stats.final_update_norm,
                });
            }
            (x, stats)
        }
    };
    let mut out = boundary.clone();
    for (k, v) in grid.interior_nodes().zip(interior) {
        out.values_mut()[k] = v;
    }
    if out.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy evaluation".into()));
    }
    Ok((out, stats))
}

/// `(1 - theta) prev + theta clip(greedy(grad_h V))`, clipped again.
pub fn policy_improve(
    problem: &ControlProblem,
    field: &GridField,
    prev: &PolicyField,
    theta: f64,
) -> Result<PolicyField> {
    let grid = *field.grid();
    if prev.grid() != &grid {
        return Err(Error::GridMismatch("policy and field grids differ".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "relaxation weight must lie in (0, 1], got {theta}"
        )));
    }
    Ok(PolicyField::from_fn(&grid, problem.a_max(), |k| {
        let target = problem.greedy_policy(&field.gradient_unchecked(k));
        if theta == 1.0 {
            return target;
        }
        prev.control(k)
            .iter()
            .zip(&target)
            .map(|(old, new)| (1.0 - theta) * old + theta * new)
            .collect::<Vector>()
    }))
}

pub fn run_policy_iteration(
    problem: &ControlProblem,
    params: &SchemeParams,
    boundary: &GridField,
    config: &PIConfig,
    reference: Option<&GridField>,
) -> Result<PIReport> {
    config.validate()?;
    let grid = *boundary.grid();
    problem.validate_on(&grid)?;
    if let Some(r) = reference {
        r.same_grid(boundary)?;
    }
    let mut policy = initial_policy(config.initial_policy, &grid, problem)?;
    let mut previous = boundary.clone();
    let mut records = Vec::with_capacity(config.max_outer_iterations);
    let mut iterates = Vec::new();
    let mut stop_reason = StopReason::IterationBudget;

    for n in 0..config.max_outer_iterations {
        let (value, solve) = policy_evaluate(
            problem,
            params,
            &policy,
            boundary,
            &config.sor,
            Some(&previous),
        )?;

        let (residual_linf, residual_l2) = error_metrics(&value, &previous)?;
        let monotonicity_violation = if n == 0 {
            0.0
        } else {
            grid.interior_nodes()
                .map(|k| value.get(k) - previous.get(k))
                .fold(0.0, f64::max)
        };
        let (linf_error, l2_error) = match reference {
            Some(r) => {
                let (a, b) = error_metrics(&value, r)?;
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        records.push(IterationRecord {
            iter: n,
            linf_error,
            l2_error,
            residual_l2,
            residual_linf,
            monotonicity_violation,
            solve,
        });

        policy = policy_improve(problem, &value, &policy, config.relaxation_theta)?;
        if config.record_iterates {
            iterates.push(value.clone());
        }
        previous = value;

        if let Some(tol) = config.outer_tolerance {
            if n > 0 && residual_linf < tol {
                stop_reason = StopReason::Converged;
                break;
            }
        }
    }

    Ok(PIReport {
        records,
        final_value: previous,
        final_policy: policy,
        iterates,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{lq_reference_policy, BenchmarkSetup};
    use crate::problem::{Drift, StateCost};
    use crate::scheme::apply_policy_operator;

    #[test]
    fn initial_policy_names() {
        assert_eq!(
            "zero".parse::<InitialPolicy>().unwrap(),
            InitialPolicy::Zero
        );
        assert_eq!(
            "adversarial2d".parse::<InitialPolicy>().unwrap(),
            InitialPolicy::Adversarial2d
        );
        assert!(matches!(
            "greedy".parse::<InitialPolicy>(),
            Err(Error::UnknownName(_))
        ));
    }

    #[test]
    fn adversarial_policy_is_clipped_and_follows_formula() {
        let s = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.05, 2.0).unwrap();
        let p = initial_policy(InitialPolicy::Adversarial2d, &s.grid, &s.problem).unwrap();
        assert!(p.within_box(2.0));
        let k = s.grid.nearest_node(&[0.5, -0.5]).unwrap();
        let x = s.grid.coord(k);
        let g = s.reference.gradient_unchecked(k);
        let a = p.control(k);
        assert!((a[0] - (g[0] + 0.3 * (2.0 * x[0] + 1.0).sin() * x[1].cos())).abs() < 1e-15);
        assert!((a[1] - (g[1] + 0.3 * x[0].cos() * (2.0 * x[1] - 0.5).sin())).abs() < 1e-15);
        // adversarial2d needs a 2D grid
        let s1 = BenchmarkSetup::lq1d(1.0, 3.0, 0.1, 6.0).unwrap();
        assert!(initial_policy(InitialPolicy::Adversarial2d, &s1.grid, &s1.problem).is_err());
        let z = initial_policy(InitialPolicy::Zero, &s1.grid, &s1.problem).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn zero_problem_converges_immediately() {
        let g = Grid::new(1.0, 0.1, 1).unwrap();
        let prob = ControlProblem::new(
            1.0,
            1.0,
            1,
            Drift::Zero,
            StateCost::Nodal(GridField::zeros(&g)),
        )
        .unwrap();
        let params = SchemeParams::for_problem(&prob, &g, 1.0).unwrap();
        let cfg = PIConfig {
            outer_tolerance: Some(1e-12),
            ..PIConfig::default()
        };
        let report =
            run_policy_iteration(&prob, &params, &GridField::zeros(&g), &cfg, None).unwrap();
        assert_eq!(report.final_value.max_abs(), 0.0);
        assert!(report.iterations() <= 2);
        assert_eq!(report.stop_reason, StopReason::Converged);
    }

    #[test]
    fn evaluation_certificate_1d() {
        let s = BenchmarkSetup::lq1d(1.0, 3.0, 0.03, 6.0).unwrap();
        let p = crate::benchmarks::lq_riccati_coefficient(1.0).unwrap();
        let policy = PolicyField::from_fn(&s.grid, 6.0, |k| {
            [-p * s.grid.coord(k)[0]].into_iter().collect()
        });
        let (v, _) = policy_evaluate(
            &s.problem,
            &s.params,
            &policy,
            &s.boundary,
            &SorSettings::default(),
            None,
        )
        .unwrap();
        let r = apply_policy_operator(&s.problem, &s.params, &policy, &v).unwrap();
        assert!(r.max_abs() <= 1e-9, "{}", r.max_abs());
        let (linf, _) = error_metrics(&v, &s.reference).unwrap();
        assert!(linf <= 0.1, "{linf}");
    }

    #[test]
    fn relaxed_update_mixes() {
        let g = Grid::new(1.0, 0.25, 1).unwrap();
        let prob =
            ControlProblem::new(1.0, 5.0, 1, Drift::Zero, StateCost::HalfSquaredNorm).unwrap();
        // V = -x gives grad 1 and greedy target -1
        let field = g.sample(|x| -x[0]);
        let prev = PolicyField::from_fn(&g, 5.0, |_| [2.0].into_iter().collect());
        let next = policy_improve(&prob, &field, &prev, 0.18).unwrap();
        for k in g.interior_nodes() {
            assert!((next.control(k)[0] - (0.82 * 2.0 + 0.18 * 1.0)).abs() < 1e-14);
        }
        let greedy = policy_improve(&prob, &GridField::constant(&g, 4.0), &prev, 1.0).unwrap();
        assert_eq!(greedy.max_abs(), 0.0);
        assert!(policy_improve(&prob, &field, &prev, 0.0).is_err());
        assert!(policy_improve(&prob, &field, &prev, 1.5).is_err());
    }

    #[test]
    fn improved_policy_matches_reference_feedback() {
        let s = BenchmarkSetup::lq1d(1.0, 3.0, 0.03, 6.0).unwrap();
        let cfg = PIConfig {
            outer_tolerance: Some(1e-12),
            max_outer_iterations: 100,
            ..PIConfig::default()
        };
        let report =
            run_policy_iteration(&s.problem, &s.params, &s.boundary, &cfg, Some(&s.reference))
                .unwrap();
        assert_eq!(report.stop_reason, StopReason::Converged);
        let worst = s
            .grid
            .interior_nodes()
            .filter(|&k| s.grid.coord(k)[0].abs() <= 2.0)
            .map(|k| {
                let x = s.grid.coord(k)[0];
                (report.final_policy.control(k)[0] - lq_reference_policy(1.0, x, 6.0).unwrap())
                    .abs()
            })
            .fold(0.0, f64::max);
        // away from the Dirichlet layer the discrete value is an exact quadratic
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn config_validation() {
        let mut c = PIConfig::default();
        c.relaxation_theta = 0.0;
        assert!(c.validate().is_err());
        c.relaxation_theta = 1.0;
        c.outer_tolerance = Some(-1.0);
        assert!(c.validate().is_err());
        c.outer_tolerance = None;
        c.max_outer_iterations = 0;
        assert!(c.validate().is_err());
    }
}

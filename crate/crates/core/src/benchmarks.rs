//! The two reference problems: a 1D discounted linear-quadratic regulator
//! with a closed-form value function, and a 2D nonlinear problem whose
//! state cost is manufactured so that a prescribed smooth function is an
//! exact fixed point of the discrete scheme on a given grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::problem::{ControlProblem, Drift, StateCost};
use crate::scheme::{certify_monotone, viscosity_coefficient, SchemeParams, ViscosityRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Lq1d,
    Manufactured2d,
}

impl Benchmark {
    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Lq1d => "lq1d",
            Benchmark::Manufactured2d => "manufactured2d",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lq1d" => Ok(Benchmark::Lq1d),
            "manufactured2d" => Ok(Benchmark::Manufactured2d),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Positive root of `P^2 + lambda P - 1 = 0`, the Riccati coefficient of
/// the 1D problem `x' = a`, `c = x^2/2 + a^2/2`.
pub fn lq_riccati_coefficient(lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "discount must be positive, got {lambda}"
        )));
    }
    // Written as 2 / (lambda + sqrt(lambda^2 + 4)) to avoid cancellation.
    Ok(2.0 / (lambda + (lambda * lambda + 4.0).sqrt()))
}

/// `V(x) = P x^2 / 2`.
pub fn lq_reference_value(lambda: f64, x: f64) -> Result<f64> {
    Ok(0.5 * lq_riccati_coefficient(lambda)? * x * x)
}

/// `a*(x) = -P x`, clipped to `[-a_max, a_max]`.
pub fn lq_reference_policy(lambda: f64, x: f64, a_max: f64) -> Result<f64> {
    Ok((-lq_riccati_coefficient(lambda)? * x).clamp(-a_max, a_max))
}

pub fn manufactured_drift(x: f64, y: f64) -> [f64; 2] {
    let b1 = 0.28 * x.sin() + 0.14 * (0.80 * y).tanh() + 0.06 * (1.20 * x - 0.40 * y).cos();
    let b2 = -0.24 * y.sin() + 0.12 * (0.70 * x).tanh() - 0.05 * (0.90 * x + 0.80 * y).sin();
    [b1, b2]
}

pub fn manufactured_value(x: f64, y: f64) -> f64 {
    0.08 * (x * x + 1.40 * y * y)
        + 0.11 * (1.30 * x + 0.20).sin() * (0.70 * y - 0.10).cos()
        + 0.055 * (0.90 * x * y).tanh()
        + 0.045 * (0.60 * x * y + 0.35 * x - 0.25 * y).sin()
        + 0.035 * (1.70 * x - 0.40 * y).cos()
        + 0.025 * (0.80 * x - 1.10 * y).atan()
        + 0.020 * (2.20 * x).sin() * (1.40 * y).sin()
}

/// Grid samples of the manufactured value function.
pub fn manufactured_samples(grid: &Grid) -> Result<GridField> {
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    Ok(grid.sample(|x| manufactured_value(x[0], x[1])))
}

/// State cost that makes the samples of `V*` an exact discrete fixed point:
///
/// `q_h = lambda V* - b . grad_h V* + |grad_h V*|^2 / 2 - N h lap_h V*`
///
/// at interior nodes, zero on the boundary. Exactness requires the control
/// box to contain `-grad_h V*`.
pub fn manufactured_source(grid: &Grid, lambda: f64, viscosity: f64) -> Result<GridField> {
    let v = manufactured_samples(grid)?;
    let nh = viscosity * grid.h();
    let mut q = vec![0.0; grid.len()];
    for k in grid.interior_nodes() {
        let x = grid.coord(k);
        let b = manufactured_drift(x[0], x[1]);
        let g = v.gradient_unchecked(k);
        let bg = b[0] * g[0] + b[1] * g[1];
        let g2 = g[0] * g[0] + g[1] * g[1];
        q[k] = lambda * v.get(k) - bg + 0.5 * g2 - nh * v.laplacian_unchecked(k);
    }
    GridField::from_values(grid, q)
}

/// Everything needed to run policy iteration on one of the benchmarks.
#[derive(Debug, Clone)]
pub struct BenchmarkSetup {
    pub benchmark: Benchmark,
    pub grid: Grid,
    pub problem: ControlProblem,
    pub params: SchemeParams,
    /// Dirichlet data on the boundary, zero inside.
    pub boundary: GridField,
    /// Closed-form (1D) or manufactured (2D) reference on all nodes.
    pub reference: GridField,
}

impl BenchmarkSetup {
    pub fn new(
        benchmark: Benchmark,
        lambda: f64,
        half_width: f64,
        h: f64,
        a_max: f64,
    ) -> Result<Self> {
        match benchmark {
            Benchmark::Lq1d => Self::lq1d(lambda, half_width, h, a_max),
            Benchmark::Manufactured2d => Self::manufactured2d(lambda, half_width, h, a_max),
        }
    }

    /// 1D LQ problem on `[-L, L]` with exact Dirichlet data and `N = max{1, a_max/2}`.
    pub fn lq1d(lambda: f64, half_width: f64, h: f64, a_max: f64) -> Result<Self> {
        let grid = Grid::new(half_width, h, 1)?;
        let problem =
            ControlProblem::new(lambda, a_max, 1, Drift::Zero, StateCost::HalfSquaredNorm)?;
        let p = lq_riccati_coefficient(lambda)?;
        let required = p * half_width;
        if required >= a_max {
            return Err(Error::ControlSaturation { required, a_max });
        }
        let n = viscosity_coefficient(&problem, &grid, ViscosityRule::Bench1d);
        let params = SchemeParams::for_problem(&problem, &grid, n)?;
        certify_monotone(&problem, &params, &grid)?;
        let reference = grid.sample(|x| 0.5 * p * x[0] * x[0]);
        let boundary = GridField::zeros(&grid).with_boundary_of(&reference)?;
        Ok(Self {
            benchmark: Benchmark::Lq1d,
            grid,
            problem,
            params,
            boundary,
            reference,
        })
    }

    /// 2D manufactured problem on `[-L, L]^2` with `N = 1.05 (|b|_inf + a_max) / 2`
    /// and `q_h` built for that `N` on this grid.
    pub fn manufactured2d(lambda: f64, half_width: f64, h: f64, a_max: f64) -> Result<Self> {
        let grid = Grid::new(half_width, h, 2)?;
        let probe = ControlProblem::new(
            lambda,
            a_max,
            2,
            Drift::Manufactured,
            StateCost::HalfSquaredNorm,
        )?;
        let n = viscosity_coefficient(&probe, &grid, ViscosityRule::Bench2d);
        let reference = manufactured_samples(&grid)?;
        let required = grid
            .interior_nodes()
            .flat_map(|k| reference.gradient_unchecked(k))
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        if required >= a_max {
            return Err(Error::ControlSaturation { required, a_max });
        }
        let q = manufactured_source(&grid, lambda, n)?;
        let problem =
            ControlProblem::new(lambda, a_max, 2, Drift::Manufactured, StateCost::Nodal(q))?;
        let params = SchemeParams::for_problem(&problem, &grid, n)?;
        certify_monotone(&problem, &params, &grid)?;
        let boundary = GridField::zeros(&grid).with_boundary_of(&reference)?;
        Ok(Self {
            benchmark: Benchmark::Manufactured2d,
            grid,
            problem,
            params,
            boundary,
            reference,
        })
    }

    /// Sup over interior nodes and the control box of `|c|`.
    pub fn cost_sup_norm(&self) -> f64 {
        self.problem.cost_sup_norm(&self.grid)
    }
}

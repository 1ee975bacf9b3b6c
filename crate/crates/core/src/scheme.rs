//! The viscous centered scheme
//!
//! ```text
//! L_a U(x) = lambda U - c(x, a) - f(x, a) . grad_h U - N h lap_h U
//! F_h[U](x) = sup_a L_a U(x) = lambda U + H(x, grad_h U) - N h lap_h U
//! ```
//!
//! and its resolvent form `L_a U = (lambda + 2dN/h) (U - T_a U)`, where
//! `T_a` is a convex combination of neighbor values plus a scaled cost.
//! With `N >= |f_i| / 2` every neighbor weight is nonnegative, which is
//! what makes the scheme monotone.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Vector};
use crate::problem::{ControlProblem, PolicyField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    viscosity: f64,
    h: f64,
    dim: usize,
    lambda: f64,
}

impl SchemeParams {
    pub fn new(viscosity: f64, h: f64, dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        for (name, v) in [("viscosity", viscosity), ("h", h), ("lambda", lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if viscosity < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "viscosity coefficient must be at least 1, got {viscosity}"
            )));
        }
        Ok(Self {
            viscosity,
            h,
            dim,
            lambda,
        })
    }

    /// Parameters for `problem` on `grid` with viscosity coefficient `n`.
    pub fn for_problem(problem: &ControlProblem, grid: &Grid, n: f64) -> Result<Self> {
        problem.validate_on(grid)?;
        Self::new(n, grid.h(), grid.dim(), problem.lambda())
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `lambda + 2 d N / h`.
    pub fn center(&self) -> f64 {
        self.lambda + 2.0 * self.dim as f64 * self.viscosity / self.h
    }

    pub fn contraction_factor(&self) -> f64 {
        contraction_factor(self.lambda, self.dim, self.viscosity, self.h)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim || grid.h() != self.h {
            return Err(Error::GridMismatch(format!(
                "scheme expects dim {} and h {}, grid has dim {} and h {}",
                self.dim,
                self.h,
                grid.dim(),
                grid.h()
            )));
        }
        Ok(())
    }
}

/// `beta_h = (2dN/h) / (lambda + 2dN/h)`.
pub fn contraction_factor(lambda: f64, dim: usize, viscosity: f64, h: f64) -> f64 {
    let diffusion = 2.0 * dim as f64 * viscosity / h;
    diffusion / (lambda + diffusion)
}

/// How the artificial viscosity coefficient is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViscosityRule {
    /// `max{1, |f|_inf / 2}` with `|f|_inf` sampled over nodes and box corners.
    Theory,
    /// `max{1, a_max / 2}`, the rule of the 1D benchmark.
    Bench1d,
    /// `1.05 * (|b|_inf + a_max) / 2` with `|b|_inf` the largest drift
    /// component magnitude on the grid.
    Bench2d,
}

pub fn viscosity_coefficient(problem: &ControlProblem, grid: &Grid, rule: ViscosityRule) -> f64 {
    match rule {
        ViscosityRule::Theory => 1f64.max(0.5 * problem.dynamics_sup_norm(grid)),
        ViscosityRule::Bench1d => 1f64.max(0.5 * problem.a_max()),
        ViscosityRule::Bench2d => {
            let b_sup = (0..grid.len())
                .map(|k| {
                    problem
                        .drift_base(&grid.coord(k))
                        .iter()
                        .fold(0.0, |m: f64, v| m.max(v.abs()))
                })
                .fold(0.0, f64::max);
            1.05 * 0.5 * (b_sup + problem.a_max())
        }
    }
}

/// Coefficients of the stencil values inside `L_a U(x)`:
/// `L_a U = center U(x) + sum_i (plus_i U(x + h e_i) + minus_i U(x - h e_i)) - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilCoeffs {
    pub center: f64,
    pub plus: Vector,
    pub minus: Vector,
}

impl StencilCoeffs {
    #[inline]
    pub fn row_sum(&self) -> f64 {
        let mut sum = self.center;
        for (p, m) in self.plus.iter().zip(&self.minus) {
            sum += p + m;
        }
        sum
    }

    #[inline]
    pub fn max_neighbor(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (p, m) in self.plus.iter().zip(&self.minus) {
            worst = worst.max(p.max(*m));
        }
        worst
    }
}

/// Stencil for drift `f` at one node. Errors if a neighbor weight turns
/// positive, i.e. `N < |f_i| / 2`.
#[inline]
pub fn stencil_coefficients(params: &SchemeParams, f: &[f64]) -> Result<StencilCoeffs> {
    let s = stencil_unchecked(params, f);
    let worst = s.max_neighbor();
    if worst > 0.0 {
        return Err(Error::MonotonicityViolation {
            node: usize::MAX,
            coefficient: worst,
        });
    }
    Ok(s)
}

#[inline]
pub(crate) fn stencil_unchecked(params: &SchemeParams, f: &[f64]) -> StencilCoeffs {
    let n = params.viscosity;
    let inv_h = 1.0 / params.h;
    let mut plus = Vector::new();
    let mut minus = Vector::new();
    for &fi in f {
        plus.push(-(n + 0.5 * fi) * inv_h);
        minus.push(-(n - 0.5 * fi) * inv_h);
    }
    StencilCoeffs {
        center: params.center(),
        plus,
        minus,
    }
}

/// Checks the stencil sign conditions at every interior node for every
/// corner of the control box.
pub fn certify_monotone(
    problem: &ControlProblem,
    params: &SchemeParams,
    grid: &Grid,
) -> Result<()> {
    params.check_grid(grid)?;
    let a_max = problem.a_max();
    let d = grid.dim();
    for k in grid.interior_nodes() {
        let x = grid.coord(k);
        for corner in 0..(1usize << d) {
            let a: Vector = (0..d)
                .map(|i| if corner >> i & 1 == 1 { a_max } else { -a_max })
                .collect();
            let s = stencil_unchecked(params, &problem.dynamics(&x, &a));
            let worst = s.max_neighbor();
            if worst > 0.0 {
                return Err(Error::MonotonicityViolation {
                    node: k,
                    coefficient: worst,
                });
            }
        }
    }
    Ok(())
}

fn check_policy(grid: &Grid, policy: &PolicyField) -> Result<()> {
    if policy.grid() != grid {
        return Err(Error::GridMismatch("policy and field grids differ".into()));
    }
    Ok(())
}

/// `L_alpha U` at interior nodes; boundary entries of the result are zero.
pub fn apply_policy_operator(
    problem: &ControlProblem,
    params: &SchemeParams,
    policy: &PolicyField,
    field: &GridField,
) -> Result<GridField> {
    let grid = *field.grid();
    params.check_grid(&grid)?;
    check_policy(&grid, policy)?;
    let nh = params.viscosity * params.h;
    let mut out = vec![0.0; grid.len()];
    for k in grid.interior_nodes() {
        let a = policy.control(k);
        let f = problem.dynamics(&grid.coord(k), a);
        let grad = field.gradient_unchecked(k);
        let transport: f64 = f.iter().zip(&grad).map(|(u, v)| u * v).sum();
        out[k] = params.lambda * field.get(k)
            - problem.running_cost(&grid, k, a)
            - transport
            - nh * field.laplacian_unchecked(k);
    }
    GridField::from_values(&grid, out)
}

/// `F_h[U] = lambda U + H(x, grad_h U) - N h lap_h U` at interior nodes,
/// zero on the boundary.
pub fn bellman_residual(
    problem: &ControlProblem,
    params: &SchemeParams,
    field: &GridField,
) -> Result<GridField> {
    let grid = *field.grid();
    params.check_grid(&grid)?;
    let nh = params.viscosity * params.h;
    let mut out = vec![0.0; grid.len()];
    for k in grid.interior_nodes() {
        let grad = field.gradient_unchecked(k);
        out[k] = params.lambda * field.get(k) + problem.hamiltonian(&grid, k, &grad)
            - nh * field.laplacian_unchecked(k);
    }
    GridField::from_values(&grid, out)
}

/// `T_a U(x)` for a single control at one interior node.
#[inline]
pub(crate) fn resolvent_at(
    problem: &ControlProblem,
    params: &SchemeParams,
    field: &GridField,
    k: usize,
    a: &[f64],
) -> f64 {
    let grid = field.grid();
    let f = problem.dynamics(&grid.coord(k), a);
    let s = stencil_unchecked(params, &f);
    let mut num = problem.running_cost(grid, k, a);
    for axis in 0..grid.dim() {
        let st = grid.stride(axis);
        num -= s.plus[axis] * field.get(k + st) + s.minus[axis] * field.get(k - st);
    }
    num / s.center
}

/// The resolvent map. With a policy, `T_alpha U`; without, `T U`, the
/// pointwise minimum over controls, attained at the greedy control for
/// `grad_h U`. Boundary entries are copied from `field`.
pub fn resolvent_map(
    problem: &ControlProblem,
    params: &SchemeParams,
    field: &GridField,
    policy: Option<&PolicyField>,
) -> Result<GridField> {
    let grid = *field.grid();
    params.check_grid(&grid)?;
    if let Some(p) = policy {
        check_policy(&grid, p)?;
    }
    let mut out = field.clone();
    for k in grid.interior_nodes() {
        out.values_mut()[k] = match policy {
            Some(p) => resolvent_at(problem, params, field, k, p.control(k)),
            None => {
                let a = problem.greedy_policy(&field.gradient_unchecked(k));
                resolvent_at(problem, params, field, k, &a)
            }
        };
    }
    Ok(out)
}

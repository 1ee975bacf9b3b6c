//! Linear solvers for the policy-evaluation systems.
//!
//! Unknowns are the interior nodes in lexicographic order; Dirichlet
//! neighbors are folded into the right-hand side. 1D systems are
//! tridiagonal and solved directly, 2D five-point systems by SOR.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::problem::{ControlProblem, PolicyField};
use crate::scheme::{stencil_unchecked, SchemeParams};

/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i > 0 {
                a[i][i - 1] = self.sub[i];
            }
            if i + 1 < n {
                a[i][i + 1] = self.sup[i];
            }
        }
        a
    }
}

/// Five-point system on an `m x m` block of interior nodes. `minus[axis]`
/// and `plus[axis]` are the matrix entries coupling to the neighbors along
/// `axis`; they are zero where the neighbor is a boundary node.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSystem2D {
    pub m: usize,
    pub center: Vec<f64>,
    pub minus: [Vec<f64>; 2],
    pub plus: [Vec<f64>; 2],
    pub rhs: Vec<f64>,
}

impl StructuredSystem2D {
    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            self.m
        } else {
            1
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for r in 0..n {
            a[r][r] = self.center[r];
            for axis in 0..2 {
                let s = self.stride(axis);
                if self.minus[axis][r] != 0.0 {
                    a[r][r - s] = self.minus[axis][r];
                }
                if self.plus[axis][r] != 0.0 {
                    a[r][r + s] = self.plus[axis][r];
                }
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluationSystem {
    Tridiagonal(TridiagonalSystem),
    Structured(StructuredSystem2D),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_update_norm: f64,
    pub converged: bool,
}

impl SolveStats {
    pub fn direct() -> Self {
        Self {
            iterations: 1,
            final_update_norm: 0.0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SorSettings {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SorSettings {
    fn default() -> Self {
        Self {
            omega: 1.7,
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

/// Assembles `L_alpha V = 0` on the interior with `boundary` as Dirichlet
/// data:
///
/// `(lambda + 2dN/h) V_k - sum_i (N/h + f_i/2h) V_{k+e_i} - sum_i (N/h - f_i/2h) V_{k-e_i} = c_alpha`.
pub fn assemble_evaluation_system(
    problem: &ControlProblem,
    params: &SchemeParams,
    policy: &PolicyField,
    boundary: &GridField,
) -> Result<EvaluationSystem> {
    let grid = *boundary.grid();
    if policy.grid() != &grid {
        return Err(Error::GridMismatch(
            "policy and boundary grids differ".into(),
        ));
    }
    if grid.dim() != params.dim() || grid.h() != params.h() {
        return Err(Error::GridMismatch(
            "scheme parameters do not match the grid".into(),
        ));
    }
    let m = grid.interior_per_axis();
    let n_nodes = grid.nodes_per_axis();

    let row = |k: usize| -> Result<(crate::scheme::StencilCoeffs, f64)> {
        let a = policy.control(k);
        let f = problem.dynamics(&grid.coord(k), a);
        let s = stencil_unchecked(params, &f);
        let worst = s.max_neighbor();
        if worst > 0.0 {
            return Err(Error::MonotonicityViolation {
                node: k,
                coefficient: worst,
            });
        }
        Ok((s, problem.running_cost(&grid, k, a)))
    };

    match grid.dim() {
        1 => {
            let mut sys = TridiagonalSystem {
                sub: vec![0.0; m],
                diag: vec![0.0; m],
                sup: vec![0.0; m],
                rhs: vec![0.0; m],
            };
            for r in 0..m {
                let k = r + 1;
                let (s, c) = row(k)?;
                sys.diag[r] = s.center;
                sys.rhs[r] = c;
                if r == 0 {
                    sys.rhs[r] -= s.minus[0] * boundary.get(k - 1);
                } else {
                    sys.sub[r] = s.minus[0];
                }
                if r + 1 == m {
                    sys.rhs[r] -= s.plus[0] * boundary.get(k + 1);
                } else {
                    sys.sup[r] = s.plus[0];
                }
            }
            Ok(EvaluationSystem::Tridiagonal(sys))
        }
        2 => {
            let len = m * m;
            let mut sys = StructuredSystem2D {
                m,
                center: vec![0.0; len],
                minus: [vec![0.0; len], vec![0.0; len]],
                plus: [vec![0.0; len], vec![0.0; len]],
                rhs: vec![0.0; len],
            };
            for i in 0..m {
                for j in 0..m {
                    let r = i * m + j;
                    let k = (i + 1) * n_nodes + (j + 1);
                    let (s, c) = row(k)?;
                    sys.center[r] = s.center;
                    sys.rhs[r] = c;
                    let local = [i, j];
                    for axis in 0..2 {
                        let st = grid.stride(axis);
                        if local[axis] == 0 {
                            sys.rhs[r] -= s.minus[axis] * boundary.get(k - st);
                        } else {
                            sys.minus[axis][r] = s.minus[axis];
                        }
                        if local[axis] + 1 == m {
                            sys.rhs[r] -= s.plus[axis] * boundary.get(k + st);
                        } else {
                            sys.plus[axis][r] = s.plus[axis];
                        }
                    }
                }
            }
            Ok(EvaluationSystem::Structured(sys))
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Thomas algorithm.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    if system.sub.len() != n || system.sup.len() != n || system.rhs.len() != n {
        return Err(Error::InvalidParameter(
            "tridiagonal band lengths differ".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let mut denom = system.diag[0];
    if denom == 0.0 {
        return Err(Error::ZeroPivot(0));
    }
    c_prime[0] = system.sup[0] / denom;
    d_prime[0] = system.rhs[0] / denom;
    for i in 1..n {
        denom = system.diag[i] - system.sub[i] * c_prime[i - 1];
        if denom == 0.0 {
            return Err(Error::ZeroPivot(i));
        }
        c_prime[i] = if i + 1 < n {
            system.sup[i] / denom
        } else {
            0.0
        };
        d_prime[i] = (system.rhs[i] - system.sub[i] * d_prime[i - 1]) / denom;
    }
    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}

/// Lexicographic SOR sweeps until the max-norm update drops to `tol` or
/// `max_iter` sweeps are spent. Non-convergence is reported in the stats.
pub fn solve_sor(
    system: &StructuredSystem2D,
    settings: &SorSettings,
    initial: &[f64],
) -> Result<(Vec<f64>, SolveStats)> {
    if !(settings.omega > 0.0 && settings.omega < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "SOR relaxation must lie in (0, 2), got {}",
            settings.omega
        )));
    }
    if initial.len() != system.len() {
        return Err(Error::InvalidParameter(format!(
            "initial guess has {} entries, system has {}",
            initial.len(),
            system.len()
        )));
    }
    let m = system.m;
    let omega = settings.omega;
    let mut x = initial.to_vec();
    let mut stats = SolveStats {
        iterations: 0,
        final_update_norm: f64::INFINITY,
        converged: false,
    };
    while stats.iterations < settings.max_iter {
        let mut update: f64 = 0.0;
        for r in 0..system.len() {
            let mut sigma = system.rhs[r];
            if system.minus[0][r] != 0.0 {
                sigma -= system.minus[0][r] * x[r - m];
            }
            if system.plus[0][r] != 0.0 {
                sigma -= system.plus[0][r] * x[r + m];
            }
            if system.minus[1][r] != 0.0 {
                sigma -= system.minus[1][r] * x[r - 1];
            }
            if system.plus[1][r] != 0.0 {
                sigma -= system.plus[1][r] * x[r + 1];
            }
            let gs = sigma / system.center[r];
            let delta = omega * (gs - x[r]);
            x[r] += delta;
            update = update.max(delta.abs());
        }
        stats.iterations += 1;
        stats.final_update_norm = update;
        if !update.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: stats.iterations,
                update,
            });
        }
        if update <= settings.tol {
            stats.converged = true;
            break;
        }
    }
    Ok((x, stats))
}

/// Gaussian elimination with partial pivoting. Test oracle only; cubic cost.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("dense system is not square".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col] == 0.0 {
            return Err(Error::SingularMatrix(col));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let prow = &top[col];
        for (off, row) in rest.iter_mut().enumerate() {
            let factor = row[col] / prow[col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                row[c] -= factor * prow[c];
            }
            b[col + 1 + off] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Dense solve of either assembled system.
pub fn solve_dense_oracle(system: &EvaluationSystem) -> Result<Vec<f64>> {
    match system {
        EvaluationSystem::Tridiagonal(t) => solve_dense(t.to_dense(), t.rhs.clone()),
        EvaluationSystem::Structured(s) => solve_dense(s.to_dense(), s.rhs.clone()),
    }
}

//! Independent reference for the 1D LQ value function.
//!
//! A Markov-chain approximation of `x' = a` on `[-L, L]`: from node `x_i`
//! under control `a` the state moves one node in the direction of `a` with
//! probability `|a| dt / h` and stays otherwise. Value iteration with
//! discount `exp(-lambda dt)` and running cost `dt (x^2 + a^2) / 2` then
//! converges to a first-order approximation of the value function. Nothing
//! here shares code with the viscous centered scheme.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqOracleSettings {
    pub lambda: f64,
    pub half_width: f64,
    pub h: f64,
    /// Control bound; must exceed the optimal feedback on the box.
    pub a_max: f64,
    /// Stop once the sup-norm update falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LqOracleSettings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            half_width: 3.0,
            h: 0.005,
            a_max: 3.0,
            tol: 1e-11,
            max_sweeps: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LqOracleResult {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub final_update: f64,
}

/// Runs value iteration from `V = 0` until the update drops below `tol`.
pub fn lq_value_iteration(s: &LqOracleSettings) -> Result<LqOracleResult> {
    let cells = (2.0 * s.half_width / s.h).round() as usize;
    if cells < 2 || s.lambda <= 0.0 || s.a_max <= 0.0 {
        return Err(Error::InvalidParameter("bad oracle settings".into()));
    }
    let n = cells + 1;
    let xs: Vec<f64> = (0..n).map(|i| -s.half_width + i as f64 * s.h).collect();
    // explicit step: a node is left within one step at most
    let dt = s.h / s.a_max;
    let gamma = (-s.lambda * dt).exp();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sweeps = 0;
    let mut update = f64::INFINITY;

    // Best value of dt a^2/2 + gamma (|a| dt/h) dv over |a| in [0, a_max],
    // where dv is the value jump toward the neighbor.
    let best_move = |dv: f64| -> f64 {
        let a = (-gamma * dv / s.h).clamp(0.0, s.a_max);
        dt * (0.5 * a * a + gamma * a * dv / s.h)
    };

    while sweeps < s.max_sweeps && update > s.tol {
        update = 0.0;
        for i in 0..n {
            let stay = gamma * v[i];
            let mut best = 0.0f64;
            if i + 1 < n {
                best = best.min(best_move(v[i + 1] - v[i]));
            }
            if i > 0 {
                best = best.min(best_move(v[i - 1] - v[i]));
            }
            next[i] = dt * 0.5 * xs[i] * xs[i] + stay + best;
            update = update.max((next[i] - v[i]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        sweeps += 1;
    }
    Ok(LqOracleResult {
        xs,
        values: v,
        sweeps,
        final_update: update,
    })
}

/// Least-squares fit `V ~ k0 + k2 x^2` over `|x| <= window`; returns `2 k2`.
pub fn fitted_quadratic_coefficient(xs: &[f64], values: &[f64], window: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(x, _)| x.abs() <= window)
        .map(|(x, v)| (x * x, *v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let suu: f64 = pts.iter().map(|p| (p.0 - mu) * (p.0 - mu)).sum();
    let suv: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    Ok(2.0 * suv / suu)
}

//! Error metrics and rate fitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridField;

/// Values this close to zero are treated as solver noise and dropped from fits.
const NOISE_FLOOR: f64 = 100.0 * f64::EPSILON;

/// `(max |u - v|, sqrt(h^d sum (u - v)^2))` over all nodes.
pub fn error_metrics(field: &GridField, reference: &GridField) -> Result<(f64, f64)> {
    field.same_grid(reference)?;
    let grid = field.grid();
    let weight = grid.h().powi(grid.dim() as i32);
    let (linf, sq) =
        field
            .values()
            .iter()
            .zip(reference.values())
            .fold((0.0f64, 0.0f64), |(m, s), (a, b)| {
                let d = a - b;
                (m.max(d.abs()), s + d * d)
            });
    Ok((linf, (weight * sq).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

impl RateFit {
    /// Per-step factor `exp(slope)` of a geometric fit.
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> RateFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    RateFit {
        slope,
        intercept,
        r_squared,
        points_used: xs.len(),
    }
}

/// Fits `log r_n = intercept + slope n` over the entries above the noise floor.
pub fn fit_geometric_rate(residuals: &[f64]) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite() && **r > NOISE_FLOOR)
        .map(|(n, r)| (n as f64, r.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    Ok(least_squares(&xs, &ys))
}

/// Fits `log e = intercept + slope log h`; the slope is the observed order.
pub fn fit_power_rate(h_values: &[f64], errors: &[f64]) -> Result<RateFit> {
    if h_values.len() != errors.len() {
        return Err(Error::InvalidParameter(format!(
            "{} mesh sizes but {} errors",
            h_values.len(),
            errors.len()
        )));
    }
    if h_values.len() < 3 {
        return Err(Error::TooFewPoints(h_values.len()));
    }
    if h_values.windows(2).any(|w| w[1] >= w[0]) || h_values.iter().any(|&h| h <= 0.0) {
        return Err(Error::InvalidParameter(
            "mesh sizes must be positive and strictly decreasing".into(),
        ));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "errors must be positive, got {e}"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = h_values
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > NOISE_FLOOR)
        .map(|(h, e)| (h.ln(), e.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    Ok(least_squares(&xs, &ys))
}

/// Iteration and discretization parts of the total error bound
/// `C1 exp(-lambda n h / (2 d N)) + C2 sqrt(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    pub iteration_term: f64,
    pub discretization_term: f64,
    pub bound: f64,
}

pub fn total_error_bound(
    c1: f64,
    c2: f64,
    n: usize,
    h: f64,
    lambda: f64,
    dim: usize,
    viscosity: f64,
) -> Result<ErrorDecomposition> {
    for (name, v) in [("C1", c1), ("C2", c2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be nonnegative, got {v}"
            )));
        }
    }
    for (name, v) in [("h", h), ("lambda", lambda), ("N", viscosity)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let iteration_term = c1 * (-lambda * n as f64 * h / (2.0 * dim as f64 * viscosity)).exp();
    let discretization_term = c2 * h.sqrt();
    Ok(ErrorDecomposition {
        iteration_term,
        discretization_term,
        bound: iteration_term + discretization_term,
    })
}

/// Default iteration-error constant `2 |c|_inf / lambda`.
pub fn default_iteration_constant(cost_sup: f64, lambda: f64) -> f64 {
    2.0 * cost_sup / lambda
}

/// Smallest `C2` with `error <= C2 sqrt(h)` on every point of a sweep.
pub fn fitted_discretization_constant(h_values: &[f64], errors: &[f64]) -> f64 {
    h_values
        .iter()
        .zip(errors)
        .map(|(h, e)| e / h.sqrt())
        .fold(0.0, f64::max)
}

/// `ceil(d N / (lambda h) ln(1/h))`, the iteration count that balances the
/// two error terms.
pub fn optimal_iteration_count(h: f64, lambda: f64, dim: usize, viscosity: f64) -> Result<usize> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "h must lie in (0, 1), got {h}"
        )));
    }
    if !(lambda > 0.0 && viscosity > 0.0) {
        return Err(Error::InvalidParameter(
            "lambda and N must be positive".into(),
        ));
    }
    let n = dim as f64 * viscosity / (lambda * h) * (1.0 / h).ln();
    Ok(n.ceil() as usize)
}

/// Smallest index `i` such that the tail `errors[i..]` has at least
/// `window` entries and `max / min <= 1 + rel_band` over it.
pub fn detect_plateau(errors: &[f64], window: usize, rel_band: f64) -> Option<usize> {
    if window < 2 || errors.len() < window {
        return None;
    }
    // scan from the back, extending the tail while the band holds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut start = None;
    for i in (0..errors.len()).rev() {
        let e = errors[i];
        if !(e > 0.0) {
            break;
        }
        lo = lo.min(e);
        hi = hi.max(e);
        if hi / lo > 1.0 + rel_band {
            break;
        }
        if errors.len() - i >= window {
            start = Some(i);
        }
    }
    start
}

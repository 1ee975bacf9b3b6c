//! Policy iteration for stationary discounted Hamilton-Jacobi-Bellman
//! equations on a monotone, artificially viscous centered scheme.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`]: uniform grids on `[-L, L]^d` and centered difference operators
//! - [`problem`]: dynamics, costs, Hamiltonian and the greedy control map
//! - [`benchmarks`]: the 1D LQ and 2D manufactured test problems
//! - [`scheme`]: the stencil, Bellman operator, resolvent map and viscosity rules
//! - [`linsolve`]: Thomas, SOR and a dense elimination oracle
//! - [`pi`]: the policy-iteration driver
//! - [`analysis`]: error metrics, rate fits and the total-error decomposition
//! - [`oracle`]: an independent value-iteration reference for the LQ problem
//! - [`checks`]: the property suite behind `hjb-pi check`
//! - [`cli`]: the command-line harness

pub mod analysis;
pub mod benchmarks;
pub mod checks;
pub mod cli;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod oracle;
pub mod pi;
pub mod problem;
pub mod scheme;

pub use error::{Error, Result};

//! Hybrid risk processes.
//!
//! A hybrid risk process is obtained from a hybrid SDE with level-dependent
//! switching by deleting the time the environment spends in drift-only states,
//! which turns those sojourns into jumps of the surplus. This crate builds such
//! models, augments them for several ruin definitions (finite Erlang horizon,
//! Poissonian observation, cumulative Parisian, Omega and Generalized Omega),
//! and computes ruin descriptors by a space-grid level chain and by Monte
//! Carlo simulation.
//!
//! ```
//! use hybrid_risk::augment::build_infinite_horizon;
//! use hybrid_risk::grid::{default_eps, discretize};
//! use hybrid_risk::matrixkit::PhaseType;
//! use hybrid_risk::models::cramer_lundberg;
//! use hybrid_risk::solver::{build_level_chain, solve_transient};
//!
//! # fn main() -> hybrid_risk::Result<()> {
//! let claim = PhaseType::exponential(2.0)?;
//! let model = cramer_lundberg(1.0, 1.0, &claim)?;
//! let aug = build_infinite_horizon(&model)?;
//! let grid = discretize(&aug, 0.0, 30.0, 1500, default_eps(0.0, 30.0, 1500))?;
//! let ds = solve_transient(&build_level_chain(&grid)?, 1.0, 0, &[])?;
//! assert!((ds.summary().psi_lower - 0.5 * (-1.0f64).exp()).abs() < 2e-2);
//! # Ok(())
//! # }
//! ```

pub mod augment;
pub mod error;
pub mod grid;
pub mod jumps;
pub mod matrixkit;
pub mod model;
pub mod models;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Matrix, Side};

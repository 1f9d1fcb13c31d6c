//! Descriptors of the space-grid approximation.
//!
//! Two backends share one [`LevelChain`]: a direct block-tridiagonal solve
//! of the transient generator, and the stationary law of a regenerative
//! auxiliary chain normalized by its pre-start atom.

pub mod chain;
pub mod descriptors;
pub mod stationary;
pub mod transient;

pub use chain::{build_level_chain, build_level_chain_with, move_rates, LevelChain, DEFAULT_CELLS_PER_BIN};
pub use descriptors::{DescriptorSet, DescriptorValues, Method, Provenance, Summary};
pub use stationary::{build_auxiliary, descriptors_from_stationary, solve_stationary, solve_via_stationary, AuxChain, AuxStationary};
pub use transient::{solve_transient, CONDITION_WARNING};

/// Scaled tolerance for agreement between the two backends.
pub const BACKEND_TOLERANCE: f64 = 1e-8;

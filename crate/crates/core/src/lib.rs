//! Adaptive FTRL and mirror-descent learners with exact regret accounting.
//!
//! The crate is organized bottom-up:
//!
//! - [`hilbert`]: points, quadratic metrics, directional derivatives and the
//!   generalized Bregman divergence.
//! - [`regularizers`]: the regularizer algebra and adaptive schedules.
//! - [`solvers`]: feasible sets, projections and argmin engines.
//! - [`losses`]: loss families, gradient oracles and curvature certificates.
//! - [`learners`]: FTRL / mirror-descent state machines and presets.
//! - [`regret`]: per-round ledgers, the regret decomposition and bound calculators.
//! - [`experiment`]: JSON-configured batch runs, sweeps and verification suites.

pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod learners;
pub mod losses;
pub mod regret;
pub mod regularizers;
pub mod solvers;

pub use error::{Error, Result};
pub use hilbert::{bregman, delta_term, dir_derivative, dot, dual_norm_sq, quad_norm_sq, DirDiff, ExtReal, Point, QuadMetric};
pub use regularizers::Regularizer;
pub use solvers::{FeasibleSet, Objective, SolverOptions};

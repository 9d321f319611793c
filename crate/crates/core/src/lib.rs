//! Computable copula measures and the quantile-pushforward form of Sklar's theorem.
//!
//! The crate works with finite-dimensional shadows of measures on the extended
//! product space `[-inf, +inf]^I`:
//!
//! - [`measures`]: one-dimensional [`Marginal`]s and discrete [`TensorMeasure`]s.
//! - [`copulas`]: checkerboard [`CheckerboardCopula`]s with uniform margins.
//! - [`projective`]: [`ProjectiveFamily`] rules `J -> X_J` over finite index
//!   subsets, with consistency checks for the marginalization projections.
//! - [`sklar`]: composition of a copula family with marginals into a
//!   [`JointMeasure`], the eager discretization, and decomposition back into a
//!   copula when the marginals are continuous.
//! - [`topology`]: an exact transport metric between finite-dimensional
//!   measures and a summable metric on families, plus compactness and
//!   continuity probes.
//! - [`extremal`]: Birkhoff decomposition of 2-d checkerboards and
//!   maximization of convex functionals over permutation copulas.

pub mod copulas;
pub mod error;
pub mod extremal;
pub mod measures;
pub mod projective;
pub mod sklar;
pub mod topology;

pub use copulas::{CheckerboardCopula, CopulaReport};
pub use error::{Error, Result};
pub use measures::{ExtReal, Grid, Marginal, MarginalKind, TensorMeasure};
pub use projective::{FamilyKind, IndexUniverse, Member, ProjectiveFamily};
pub use sklar::JointMeasure;
pub use topology::FddMetricConfig;

/// Index label of a coordinate.
pub type Label = u32;

/// Tolerance for "sums to one" and "uniform margin" checks.
pub const MASS_TOL: f64 = 1e-12;

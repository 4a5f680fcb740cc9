//! Constructive truncation of grid fields near convex constraint sets.
//!
//! Given a field `u` on a uniform grid and a homogeneous differential
//! operator `B` of order 1 or 2, this crate modifies `u` on a small set so
//! that `B u` lands uniformly close to a prescribed compact convex set `K`,
//! while keeping the highest derivatives under control.  The engine is a
//! stopping-time ball selection (a greedy Vitali sweep) combined with a
//! variable-radius mollification whose radius profile shrinks to zero toward
//! the boundary of each selected ball, iterated under a geometric schedule
//! of inflation budgets.
//!
//! On top of the core engine the crate ships:
//!
//! * convex geometry (`[convex]`): distance, projection, inflation and
//!   Hausdorff distance for balls and vertex polytopes;
//! * grid fields (`[field]`): the `FLD1` binary format, finite-difference
//!   operator application, ball averages and discrete integrals;
//! * truncation drivers (`[truncation]`): whole-space, bounded-domain and
//!   position-dependent constraint-set variants, with per-stage reports;
//! * linear constraints with low-order potentials (`[euler]`): the symmetric
//!   gradient with its second-order annihilator, and a second-order
//!   potential for the linearized isentropic Euler system, both with
//!   Fourier-symbol exactness checks;
//! * a reproducible experiment harness (`[harness]`) behind the `mz` CLI.
//!
//! See the crate examples for one runnable entry point per capability.

pub mod convex;
pub mod error;
pub mod euler;
pub mod field;
pub mod harness;
pub mod truncation;

pub use error::MzError;

/// Crate result type.
pub type Result<T> = std::result::Result<T, MzError>;

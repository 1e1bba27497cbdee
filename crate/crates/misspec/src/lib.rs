//! Exact linear off-policy value estimation on finite Markov reward processes.
//!
//! The crate computes value functions, `L2(mu)` and sup-norm projections onto a
//! linear feature class, population and empirical LSTD, the Bayes abstraction
//! estimator, instance-dependent approximation-factor bounds, and builds the
//! lower-bound instance families that show when those bounds are tight.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod mrp;
pub mod projections;
pub mod rng;
pub mod scalar;
pub mod simplex;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use mrp::{ProblemInstance, RewardModel};
pub use projections::NormKind;
pub use scalar::ExtendedScalar;

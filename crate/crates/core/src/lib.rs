//! Metric rescaling for nonsmooth convex optimization.
//!
//! The crate collects rank-one rescaling updates (Shor space dilation,
//! unit-step BFGS in inverse-Hessian and factored form, the central-cut
//! ellipsoid step) and the algorithms built on them:
//!
//! * [`separators`] decide whether `0` lies in a compact convex set given
//!   only a linear-optimization oracle, returning a separating normal when it
//!   does not;
//! * [`minimizers`] run BFGS updating without a line search, either at a fixed
//!   point until a descent step appears or as a full minimization loop;
//! * [`instances`] generates the test families, computes reference optima,
//!   analyzes traces and drives the figure experiments.

pub mod error;
pub mod instances;
pub mod linalg;
pub mod minimizers;
pub mod oracles;
pub mod separators;
pub mod trace;
pub mod updates;

pub use error::{RescaleError, Result};
pub use linalg::{Matrix, SpdMatrix, Vector};
pub use trace::{Outcome, RunTrace, TraceRow};

//! Stepsize-schedule robustness toolkit for stochastic gradient descent.
//!
//! The crate evaluates last-iterate convergence bounds for annealed
//! stepsize schedules under a multiplicative misspecification `rho` of the
//! base stepsize, runs projected SGD on convex test problems, builds the
//! adversarial constructions showing linear degradation for fixed and
//! inverse-sqrt stepsizes, and runs grid-search robustness experiments.

pub mod bounds;
pub mod config;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod plot;
pub mod problems;
pub mod schedule;
pub mod sgd;

pub use bounds::{BoundReport, ProblemScales};
pub use error::{Error, Result};
pub use schedule::{Schedule, ScheduleKind, TailFunctions, TailMode};

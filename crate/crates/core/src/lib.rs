//! Deterministic and stochastic state estimation for dynamics reflected at
//! the origin.
//!
//! The crate covers the whole pipeline for a scalar state on the half-line:
//!
//! * [`skorokhod`] simulates the reflected dynamics and its penalized
//!   approximation.
//! * [`hjb`] solves the viscous and inviscid Hamilton–Jacobi–Bellman
//!   equations with a monotone Lax–Friedrichs scheme.
//! * [`costcome`] computes the cost-to-come and the minimum-energy
//!   (Mortensen) estimate.
//! * [`filtering`] solves the Zakai equation, its robust form, and a
//!   particle filter.
//! * [`control`] computes the backward-control value function and compares
//!   it with the vanishing-viscosity limit.
//! * [`experiment`] runs configured experiments and writes artifacts.
//!
//! ```
//! use mortensen::scenario::builtin_scenario;
//! use mortensen::skorokhod::{solve_explicit, ControlSignal};
//!
//! let spec = builtin_scenario("figure1").unwrap();
//! let omega = ControlSignal::from_func(&spec.omega, &spec.grid);
//! let path = solve_explicit(spec.x0, &omega).unwrap();
//! assert!(path.x.iter().all(|&x| x >= 0.0));
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod costcome;
pub mod error;
pub mod experiment;
pub mod field;
pub mod filtering;
pub mod hjb;
pub mod io;
pub mod scenario;
pub mod skorokhod;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use scenario::{builtin_scenario, Func, GridSpec, PenaltySpec, ProblemSpec};

//! Velocity-level kinematic control of redundant serial manipulators under
//! hard joint-space and Cartesian-space inequality limits.
//!
//! A control tick turns the current configuration into a generalized velocity
//! box ([`constraints::build_augmented`]), then [`solver::sns_solve`] finds a
//! joint velocity that realizes the end-effector task inside that box. When
//! the robot runs out of redundancy, the task is scaled down along its own
//! direction instead of being deformed.
//!
//! The [`oracle`] module is an exhaustive reference solver for small instances
//! and [`sim`] wires everything into a closed-loop simulator with CSV logging.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod oracle;
pub mod sim;
pub mod solver;
pub mod trajectory;

pub use error::{Error, Result};

//! Simulation and control of a spherical robot rolled by a single internal
//! pendulum whose axle is tilted inside the shell.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod controller;
pub mod drive;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod harness;
pub mod integrator;
pub mod interp;
pub mod quasistatic;
pub mod spatial;
pub mod stability;

pub use error::{Error, Result};

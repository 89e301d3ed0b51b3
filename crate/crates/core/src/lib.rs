//! Mild solutions of coupled linear parabolic systems with a unit delay.
//!
//! The crate is organised bottom-up: [`grid`] (discretization and norms),
//! [`coeff`] (the parameter space), [`propagator`] (the evolution family of
//! the uncoupled higher-order part), [`mild`] (Duhamel solvers for the full
//! delayed system) and [`analysis`] (explicit constants, schedules, oracles and
//! convergence studies).

pub mod analysis;
pub mod coeff;
pub mod error;
pub mod grid;
pub mod mild;
pub mod propagator;

pub use error::{Error, Result};

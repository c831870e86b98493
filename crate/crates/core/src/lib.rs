//! Simulation and analysis toolkit for a cross-diffusive predator–prey system
//! on an interval with no-flux boundaries, together with its thin-film
//! regularization.
//!
//! The crate is organised bottom-up: [`grid`] provides the cell-centered
//! finite-volume mesh and discrete operators, [`model`] the parameters and
//! right-hand sides, [`stepper`] the time integrators, [`functionals`] the
//! energies and dissipations, [`inequalities`] numerical checks of the
//! auxiliary inequalities, and [`experiments`] the long-time studies.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod inequalities;
pub mod model;
pub mod stepper;

pub use error::{Error, Result, RunFailure};
pub use grid::{Field, Grid1D};
pub use model::{KineticParams, ModelKind, RegParams, State};
pub use stepper::{Scheme, StepperConfig};

use thiserror::Error;

use crate::model::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("argument out of domain in {func}: {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("state is not strictly positive (min u = {min_u}, min v = {min_v})")]
    NonPositiveState { min_u: f64, min_v: f64 },

    #[error("nonzero flux {value} at boundary face {face} violates the no-flux condition")]
    BoundaryFlux { face: usize, value: f64 },

    #[error("singular banded matrix (zero pivot at row {0})")]
    SingularMatrix(usize),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Run(Box<RunFailure>),
}

/// Hard failure of a time integration: the step size fell below `dt_min`.
///
/// Carries the last accepted state and every sample recorded before the
/// failure so that callers can still flush partial output.
#[derive(Debug, Error)]
#[error("time step underflow at t = {t}: dt = {dt} < dt_min = {dt_min} ({reason})")]
pub struct RunFailure {
    pub t: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub reason: String,
    pub last_state: State,
    pub samples: Vec<State>,
}

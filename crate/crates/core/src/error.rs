use thiserror::Error;

use crate::circuit::CircuitError;
use crate::fib_data::DataError;
use crate::lattice::LatticeError;
use crate::statevec::StateError;

/// Crate-level error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{0}")]
    OutOfRange(String),
}

//! Quantum circuits for measuring the vertex and plaquette stabilizers of the
//! Fibonacci Levin-Wen code, together with a small dense state-vector
//! simulator and brute-force oracles that check every circuit identity.
//!
//! Module map:
//!
//! * [`fib_data`]: the delta, F and S tensors, the 2x2 reflections F, S, U and
//!   the Fibonacci dimension counts.
//! * [`statevec`]: dense state vectors (little-endian, qubit 0 is the least
//!   significant bit of the basis index).
//! * [`circuit`]: gate-list IR with simulation, unitary extraction, inversion,
//!   borrowed-ancilla Toffoli lowering, gate counting and a text format.
//! * [`lattice`]: abstract trivalent lattices rewired by F-moves.
//! * [`levinwen`]: circuit builders, operator oracles and verification suites.
//! * [`cli`]: the `fibcode` command-line front end.
//!
//! Data-parallel sweeps (basis-state verification, unitary extraction, oracle
//! assembly) run on rayon when the default `parallel` feature is enabled and
//! fall back to plain iterators otherwise.

pub mod circuit;
pub mod cli;
mod error;
pub mod exec;
pub mod fib_data;
pub mod lattice;
pub mod levinwen;
pub mod statevec;

pub use circuit::{Circuit, CostModel, Gate, GateCounts};
pub use error::Error;
pub use fib_data::{FibonacciTensorSet, NamedMatrix};
pub use lattice::{FMoveRecord, TrivalentLattice};
pub use levinwen::VerificationReport;
pub use statevec::StateVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

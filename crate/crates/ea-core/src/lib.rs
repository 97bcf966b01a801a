//! Simulation and verification toolkit for the zero-temperature
//! Edwards-Anderson model on finite grids.
//!
//! The model assigns an i.i.d. standard Gaussian coupling `J_e` to every
//! nearest-neighbor edge of an `n_cols x n_rows` grid and studies the spin
//! configurations maximizing the Hamiltonian `H(sigma) = sum_e J_e
//! sigma_u sigma_v`. This crate provides:
//!
//! * exact ground-state solvers (gauge-fixed Gray-code enumeration and a
//!   column transfer-matrix dynamic program for strips),
//! * the normalized Hermite basis, Gauss-Hermite quadrature and the
//!   Ornstein-Uhlenbeck eigenvalue kernel,
//! * stationary OU evolution of the coupling field and overlap observables,
//! * estimators for the Hermite-Fourier spectral measure of the two-point
//!   function `sigma_u sigma_v` (tensor quadrature on tiny graphs, nested
//!   Monte Carlo subset masses, the line mass),
//! * barrier configurations, the lower-bound coupling construction and the
//!   straight-column/envelope combinatorics used in cutset symmetry
//!   arguments.
//!
//! Everything is deterministic given a master seed; see [`seeds`].

pub mod barrier;
mod bitset;
pub mod ground_state;
pub mod hermite;
pub mod io;
pub mod lattice;
pub mod ou_flow;
pub mod seeds;
pub mod spectral;

pub use ground_state::{CouplingField, GroundStateResult, SpinConfig};
pub use lattice::{EdgeId, EdgeSet, GridGraph, TerminalPair, VertexId};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid size: {0}")]
    GridSize(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

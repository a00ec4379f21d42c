//! Linearized stability of line solitons in a two-dimensional
//! nonlinear Schrödinger system coupled to a mean field.

pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod continuation;
pub mod instability;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_grid, Grid1D, Parity, ParityTag, Scheme};
pub use operators::{LinOp, Params, Subspace};
pub use resolvent::{ComplexState, StateVector};

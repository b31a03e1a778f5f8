//! Gaussian states, symplectic maps, losses and homodyne measurement.

mod measurement;
mod state;
mod symplectic;

pub use measurement::HomodyneOutcome;
pub use state::{direction, rotation2, GaussianState, SYMMETRY_TOL, UNCERTAINTY_TOL};
pub use symplectic::{symplectic_form, SymplecticTransform, SYMPLECTIC_TOL};

//! Simulation and analysis of the measurement-and-feedforward squeezing gate
//! for Gaussian optical states.
//!
//! The crate is organized bottom-up:
//!
//! - [`gaussian`]: Gaussian states, symplectic maps, losses, homodyne
//!   conditioning and sampling.
//! - [`squeezer`]: the off-line squeezer (beam splitter, homodyne of the
//!   reflected port, feedforward displacement) as a closed-form map, an
//!   ensemble channel with imperfections, and Monte Carlo trajectories.
//! - [`metrology`]: noise powers, the Gaussian fidelity to an ideal squeezed
//!   target, and analytic Wigner functions.
//! - [`tomography`]: phase-scanned homodyne records and filtered
//!   back-projection.
//! - [`compiler`]: single-mode Gaussian unitaries compiled into rotations,
//!   one squeezer and a displacement.
//! - [`experiment`]: the configuration-driven runner behind the `sqzlab` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod compiler;
pub mod error;
pub mod experiment;
pub mod format;
pub mod gaussian;
pub mod metrology;
pub mod squeezer;
pub mod tomography;
pub mod units;

pub use error::{SqzError, SqzResult};
pub use gaussian::{GaussianState, HomodyneOutcome, SymplecticTransform};

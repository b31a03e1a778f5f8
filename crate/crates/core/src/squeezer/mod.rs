//! The off-line squeezer: a signal mixed with a squeezed ancilla on a beam
//! splitter of transmittance `T`, homodyne detection of `p` on the reflected
//! port, and a feedforward displacement of the transmitted `p` by `g` times
//! the reading.
//!
//! Three views of the same device are provided: [`ideal_output_map`] (closed
//! form, nominal gain, no losses), [`run_deterministic`] (ensemble channel with
//! an [`ImperfectionModel`]) and [`run_trajectory`] (single-shot Monte Carlo).

mod config;
mod protocol;
mod trajectory;

pub use config::{
    nominal_gain, r_from_transmittance, squeezing_db_from_transmittance, transmittance_from_r,
    ImperfectionModel, ProtocolConfig, DEGRADED_GAIN_ERROR, DEGRADED_PHASE_JITTER_RAD,
};
pub use protocol::{ideal_output_map, run_deterministic, ProtocolResult};
pub use trajectory::{
    run_trajectory, run_trajectory_with, MomentAccumulator, RngNoise, ShotNoise, ShotRecord, TrajectoryRun,
    SHOTS_PER_BATCH,
};

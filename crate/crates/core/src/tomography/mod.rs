//! Simulated homodyne tomography: phase-scanned quadrature records and
//! Wigner reconstruction by filtered back-projection.

mod fbp;
mod grid;
mod scan;

pub use fbp::{
    project_grid, reconstruct_wigner, Histogram, DEFAULT_FILTER_CUTOFF, HISTOGRAM_BINS,
    HISTOGRAM_HALF_WIDTH_SIGMAS,
};
pub use grid::{GridMoments, GridSpec, WignerGrid};
pub use scan::{
    moments_from_marginals, moments_from_scan, simulate_phase_scan, state_from_scan, uniform_phases,
    PhaseScanRecord, ScanMetadata, MIN_SCAN_PHASES,
};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{SqzError, SqzResult};
use crate::format::fmt_f64;
use crate::gaussian::{direction, GaussianState};

/// Smallest number of phases accepted by [`simulate_phase_scan`].
pub const MIN_SCAN_PHASES: usize = 8;

/// Descriptive data stored next to a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub source: String,
    pub seed: Option<u64>,
    pub samples_per_phase: Vec<usize>,
    /// The state the samples were drawn from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_state: Option<GaussianState>,
}

/// Homodyne readings taken at a set of local-oscillator phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanRecord {
    phases: Vec<f64>,
    samples: Vec<Vec<f64>>,
    pub metadata: ScanMetadata,
}

impl PhaseScanRecord {
    /// Checks that phases are strictly increasing in `[0, pi)` and that each
    /// carries at least one finite sample.
    pub fn new(phases: Vec<f64>, samples: Vec<Vec<f64>>, source: impl Into<String>, seed: Option<u64>) -> SqzResult<Self> {
        if phases.is_empty() {
            return Err(SqzError::InvalidRecord("record has no phases".into()));
        }
        if phases.len() != samples.len() {
            return Err(SqzError::InvalidRecord(format!(
                "{} phases but {} sample lists",
                phases.len(),
                samples.len()
            )));
        }
        for (k, &phi) in phases.iter().enumerate() {
            if !(0.0..PI).contains(&phi) {
                return Err(SqzError::InvalidRecord(format!("phase {phi} outside [0, pi)")));
            }
            if k > 0 && phi <= phases[k - 1] {
                return Err(SqzError::InvalidRecord("phases must be strictly increasing".into()));
            }
            if samples[k].is_empty() {
                return Err(SqzError::InvalidRecord(format!("phase {phi} has no samples")));
            }
            if samples[k].iter().any(|v| !v.is_finite()) {
                return Err(SqzError::InvalidRecord(format!("phase {phi} has a non-finite sample")));
            }
        }
        let metadata = ScanMetadata {
            source: source.into(),
            seed,
            samples_per_phase: samples.iter().map(Vec::len).collect(),
            true_state: None,
        };
        Ok(Self {
            phases,
            samples,
            metadata,
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    /// Sample mean and unbiased variance at every phase.
    pub fn phase_statistics(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| mean_and_variance(s)).collect()
    }

    /// Writes `phase_rad,sample` lines with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> SqzResult<()> {
        out.write_all(b"phase_rad,sample\n")?;
        let mut line = String::new();
        for (phi, samples) in self.phases.iter().zip(&self.samples) {
            let p = fmt_f64(*phi);
            for v in samples {
                line.clear();
                line.push_str(&p);
                line.push(',');
                line.push_str(&fmt_f64(*v));
                line.push('\n');
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the CSV layout of [`PhaseScanRecord::write_csv`]. Rows of the
    /// same phase must be contiguous.
    pub fn read_csv<R: BufRead>(input: R, metadata: Option<ScanMetadata>) -> SqzResult<Self> {
        let mut phases: Vec<f64> = Vec::new();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("phase")) {
                continue;
            }
            let bad = || SqzError::InvalidRecord(format!("line {}: expected `phase_rad,sample`", lineno + 1));
            let (a, b) = line.split_once(',').ok_or_else(bad)?;
            let phi: f64 = a.trim().parse().map_err(|_| bad())?;
            let v: f64 = b.trim().parse().map_err(|_| bad())?;
            if phases.last() == Some(&phi) {
                samples.last_mut().expect("parallel to phases").push(v);
            } else {
                phases.push(phi);
                samples.push(vec![v]);
            }
        }
        let mut rec = Self::new(phases, samples, "csv", None)?;
        if let Some(meta) = metadata {
            if meta.samples_per_phase != rec.metadata.samples_per_phase {
                return Err(SqzError::InvalidRecord(
                    "sample counts disagree with the metadata sidecar".into(),
                ));
            }
            rec.metadata = meta;
        }
        Ok(rec)
    }
}

pub(crate) fn mean_and_variance(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let m = s.iter().sum::<f64>() / n;
    let v = if s.len() > 1 {
        s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

/// Phases `k pi / n` for `k = 0..n`.
pub fn uniform_phases(n_phases: usize) -> Vec<f64> {
    (0..n_phases).map(|k| PI * k as f64 / n_phases as f64).collect()
}

/// Draws `samples_per_phase` homodyne readings of a single-mode state at
/// each of `n_phases` uniformly spaced phases. Phase `k` uses its own
/// random stream, so the record does not depend on scheduling.
pub fn simulate_phase_scan(
    state: &GaussianState,
    n_phases: usize,
    samples_per_phase: usize,
    rng_seed: u64,
) -> SqzResult<PhaseScanRecord> {
    state.require_single_mode()?;
    state.validate()?;
    if n_phases < MIN_SCAN_PHASES {
        return Err(SqzError::InvalidParameter {
            name: "n_phases",
            value: n_phases as f64,
            reason: "a phase scan needs at least 8 phases",
        });
    }
    if samples_per_phase == 0 {
        return Err(SqzError::InvalidParameter {
            name: "samples_per_phase",
            value: 0.0,
            reason: "every phase needs at least one sample",
        });
    }
    let phases = uniform_phases(n_phases);
    let m = state.mode_mean(0);
    let c = state.mode_cov(0);
    let samples: Vec<Vec<f64>> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let u = direction(phi);
            let mean = u.dot(&m);
            let sd = (u.transpose() * c * u)[0].sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(k as u64);
            (0..samples_per_phase)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + sd * z
                })
                .collect()
        })
        .collect();
    let mut rec = PhaseScanRecord::new(phases, samples, "simulated", Some(rng_seed))?;
    rec.metadata.true_state = Some(state.clone());
    Ok(rec)
}

/// Least-squares fit of the mean fringe `m_x cos(phi) + m_p sin(phi)` and of
/// the variance curve `V_x cos^2 + V_p sin^2 + 2 C_xp sin cos` to per-phase
/// statistics.
pub fn moments_from_marginals(
    phases: &[f64],
    means: &[f64],
    variances: &[f64],
) -> SqzResult<(Vector2<f64>, Matrix2<f64>)> {
    if phases.len() != means.len() || phases.len() != variances.len() {
        return Err(SqzError::DimensionMismatch {
            expected: phases.len(),
            found: means.len().min(variances.len()),
        });
    }
    let mut distinct: Vec<f64> = phases.iter().map(|p| p.rem_euclid(PI)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        return Err(SqzError::InvalidRecord(
            "at least three distinct phases are needed to fix the covariance".into(),
        ));
    }
    let n = phases.len();
    let a_mean = DMatrix::from_fn(n, 2, |k, j| if j == 0 { phases[k].cos() } else { phases[k].sin() });
    let a_var = DMatrix::from_fn(n, 3, |k, j| {
        let (s, c) = phases[k].sin_cos();
        [c * c, s * s, 2.0 * s * c][j]
    });
    let solve = |a: DMatrix<f64>, b: &[f64]| -> SqzResult<DVector<f64>> {
        a.svd(true, true)
            .solve(&DVector::from_column_slice(b), 1e-14)
            .map_err(|e| SqzError::InvalidRecord(format!("least-squares fit failed: {e}")))
    };
    let m = solve(a_mean, means)?;
    let v = solve(a_var, variances)?;
    Ok((Vector2::new(m[0], m[1]), Matrix2::new(v[0], v[2], v[2], v[1])))
}

/// Mean vector and covariance matrix fitted to a phase scan.
pub fn moments_from_scan(record: &PhaseScanRecord) -> SqzResult<(Vector2<f64>, Matrix2<f64>)> {
    let stats = record.phase_statistics();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let vars: Vec<f64> = stats.iter().map(|s| s.1).collect();
    moments_from_marginals(record.phases(), &means, &vars)
}

/// [`moments_from_scan`] as a validated Gaussian state.
pub fn state_from_scan(record: &PhaseScanRecord) -> SqzResult<GaussianState> {
    let (m, c) = moments_from_scan(record)?;
    let s = GaussianState::single_mode(m, c);
    s.validate()?;
    Ok(s)
}

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::state::{direction, symmetrize, GaussianState};
use crate::error::{SqzError, SqzResult};

/// A single homodyne reading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOutcome {
    pub value: f64,
    /// Measured quadrature angle in `[0, pi)`; 0 is `x`, `pi/2` is `p`.
    pub angle: f64,
    pub mode: usize,
}

impl HomodyneOutcome {
    /// Reduces `angle` to `[0, pi)`. The quadrature at `angle + pi` is the
    /// negative of the one at `angle`, so the value flips sign when a
    /// half-turn is removed.
    pub fn new(value: f64, angle: f64, mode: usize) -> Self {
        let turns = (angle / PI).floor();
        let mut reduced = angle - turns * PI;
        if reduced >= PI {
            reduced -= PI;
        }
        let flip = (turns as i64).rem_euclid(2) == 1;
        Self {
            value: if flip { -value } else { value },
            angle: reduced,
            mode,
        }
    }
}

/// Prior statistics of the measured quadrature and its correlations with the
/// rest of the system.
struct Projection {
    mean: f64,
    variance: f64,
    keep: Vec<usize>,
    cross: DVector<f64>,
}

impl GaussianState {
    fn project(&self, mode: usize, angle: f64) -> SqzResult<Projection> {
        self.check_mode(mode)?;
        let u = direction(angle);
        let variance = self.marginal_variance(mode, angle)?;
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(SqzError::DegenerateMeasurement { variance });
        }
        let keep: Vec<usize> = (0..self.mean().len())
            .filter(|&i| i / 2 != mode)
            .collect();
        let (k, cov) = (2 * mode, self.cov());
        let cross = DVector::from_iterator(
            keep.len(),
            keep.iter().map(|&i| cov[(i, k)] * u[0] + cov[(i, k + 1)] * u[1]),
        );
        Ok(Projection {
            mean: self.quadrature_mean(mode, angle)?,
            variance,
            keep,
            cross,
        })
    }

    /// State of the remaining modes after reading `outcome` for the quadrature
    /// at `angle` on `mode`. The conditioned covariance does not depend on the
    /// outcome.
    pub fn homodyne_condition(&self, mode: usize, angle: f64, outcome: f64) -> SqzResult<GaussianState> {
        let proj = self.project(mode, angle)?;
        Ok(self.condition_on(&proj, outcome))
    }

    fn condition_on(&self, proj: &Projection, outcome: f64) -> GaussianState {
        let n = proj.keep.len();
        let shift = (outcome - proj.mean) / proj.variance;
        let mean = DVector::from_iterator(
            n,
            proj.keep
                .iter()
                .zip(proj.cross.iter())
                .map(|(&i, c)| self.mean()[i] + c * shift),
        );
        let cov = DMatrix::from_fn(n, n, |a, b| {
            self.cov()[(proj.keep[a], proj.keep[b])] - proj.cross[a] * proj.cross[b] / proj.variance
        });
        GaussianState::from_moments(mean, symmetrize(cov))
            .expect("conditioned moments have matching shapes")
    }

    /// Draws one homodyne reading from the exact marginal and returns it with
    /// the conditioned remainder.
    pub fn homodyne_sample_with<R: Rng + ?Sized>(
        &self,
        mode: usize,
        angle: f64,
        rng: &mut R,
    ) -> SqzResult<(HomodyneOutcome, GaussianState)> {
        let proj = self.project(mode, angle)?;
        let normal = Normal::new(proj.mean, proj.variance.sqrt())
            .map_err(|_| SqzError::DegenerateMeasurement { variance: proj.variance })?;
        let value = normal.sample(rng);
        let rest = self.condition_on(&proj, value);
        Ok((HomodyneOutcome::new(value, angle, mode), rest))
    }

    /// Seeded variant of [`GaussianState::homodyne_sample_with`].
    pub fn homodyne_sample(
        &self,
        mode: usize,
        angle: f64,
        rng_seed: u64,
    ) -> SqzResult<(HomodyneOutcome, GaussianState)> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        self.homodyne_sample_with(mode, angle, &mut rng)
    }
}

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ImperfectionModel, ProtocolConfig};
use super::protocol::{
    applied_gain, pre_measurement_state, prepared_ancilla, ProtocolResult, ANCILLA, MEASURED_ANGLE, SIGNAL,
};
use crate::error::{SqzError, SqzResult};
use crate::gaussian::{direction, GaussianState, HomodyneOutcome, SymplecticTransform};

/// Shots per independently seeded batch.
pub const SHOTS_PER_BATCH: usize = 4096;

/// Source of the random numbers consumed by one shot.
pub trait ShotNoise {
    /// A homodyne reading drawn from `N(mean, std_dev^2)`.
    fn homodyne(&mut self, mean: f64, std_dev: f64) -> f64;
    /// A phase offset drawn from `N(0, std_dev^2)`.
    fn phase(&mut self, std_dev: f64) -> f64;
}

/// [`ShotNoise`] backed by a random number generator.
pub struct RngNoise<R>(pub R);

impl<R: Rng> ShotNoise for RngNoise<R> {
    fn homodyne(&mut self, mean: f64, std_dev: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.0);
        mean + std_dev * z
    }

    fn phase(&mut self, std_dev: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.0);
        std_dev * z
    }
}

/// One feedforward shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_index: usize,
    /// Raw homodyne reading, electronic noise included, before any rescaling.
    pub outcome: f64,
    pub out_mean_x: f64,
    pub out_mean_p: f64,
}

/// Running first and second moments of a Gaussian mixture, accumulated one
/// component at a time. Merging is plain summation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: usize,
    pub sum_mean: Vector2<f64>,
    pub sum_outer: Matrix2<f64>,
    pub sum_cov: Matrix2<f64>,
}

impl MomentAccumulator {
    pub fn push(&mut self, mean: &Vector2<f64>, cov: &Matrix2<f64>) {
        self.count += 1;
        self.sum_mean += mean;
        self.sum_outer += mean * mean.transpose();
        self.sum_cov += cov;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        self.sum_mean += other.sum_mean;
        self.sum_outer += other.sum_outer;
        self.sum_cov += other.sum_cov;
    }

    pub fn mean(&self) -> Vector2<f64> {
        self.sum_mean / self.count as f64
    }

    /// Spread of the per-shot means.
    pub fn mean_scatter(&self) -> Matrix2<f64> {
        let m = self.mean();
        self.sum_outer / self.count as f64 - m * m.transpose()
    }

    /// Covariance of the whole mixture: average conditional covariance plus
    /// scatter of the conditional means.
    pub fn cov(&self) -> Matrix2<f64> {
        let c = self.sum_cov / self.count as f64 + self.mean_scatter();
        (c + c.transpose()) * 0.5
    }

    pub fn state(&self) -> SqzResult<GaussianState> {
        if self.count == 0 {
            return Err(SqzError::Unsupported("no shots accumulated".into()));
        }
        let s = GaussianState::single_mode(self.mean(), self.cov());
        s.validate()?;
        Ok(s)
    }

    /// Standard errors of the ensemble mean, per quadrature.
    pub fn mean_standard_error(&self) -> Vector2<f64> {
        let n = self.count as f64;
        let s = self.mean_scatter();
        Vector2::new((s[(0, 0)].max(0.0) / n).sqrt(), (s[(1, 1)].max(0.0) / n).sqrt())
    }

    /// Standard errors of the ensemble variances, per quadrature, from the
    /// Gaussian approximation `sd(s^2) = s^2 sqrt(2/(n-1))` applied to the
    /// scatter of the conditional means.
    pub fn variance_standard_error(&self) -> Vector2<f64> {
        let n = self.count as f64;
        let s = self.mean_scatter();
        let f = (2.0 / (n - 1.0).max(1.0)).sqrt();
        Vector2::new(s[(0, 0)].max(0.0) * f, s[(1, 1)].max(0.0) * f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRun {
    pub result: ProtocolResult,
    pub shots: Vec<ShotRecord>,
    /// Moments of each seeded batch, in batch order.
    pub batches: Vec<MomentAccumulator>,
    pub ensemble: MomentAccumulator,
}

/// Per-run constants shared by every shot.
struct ShotContext<'a> {
    config: &'a ProtocolConfig,
    imperf: &'a ImperfectionModel,
    local_input: GaussianState,
    /// Pre-measurement state when no per-shot randomness enters before the
    /// homodyne.
    fixed_prior: Option<GaussianState>,
    gain: f64,
    coupler_gain: f64,
    noise_var: f64,
    frame: SymplecticTransform,
}

impl<'a> ShotContext<'a> {
    fn new(config: &'a ProtocolConfig, imperf: &'a ImperfectionModel, input: &GaussianState) -> SqzResult<Self> {
        config.validate()?;
        imperf.validate()?;
        input.require_single_mode()?;
        if !config.ancilla_squeezing.is_finite() {
            return Err(SqzError::Unsupported(
                "an infinitely squeezed ancilla cannot be sampled".into(),
            ));
        }
        let local_input = input.apply(&SymplecticTransform::phase_rotation(-config.squeeze_angle))?;
        let fixed_prior = if imperf.lock_jitter() == 0.0 {
            let ancilla = prepared_ancilla(config, imperf, Some(0.0))?;
            Some(pre_measurement_state(config, imperf, &local_input, &ancilla)?)
        } else {
            None
        };
        Ok(Self {
            config,
            imperf,
            local_input,
            fixed_prior,
            gain: applied_gain(config, imperf)? / imperf.measurement_efficiency().sqrt(),
            coupler_gain: imperf.displacement_coupler.sqrt(),
            noise_var: imperf.electronic_noise_variance(),
            frame: SymplecticTransform::phase_rotation(config.squeeze_angle),
        })
    }

    fn shot<N: ShotNoise>(&self, index: usize, noise: &mut N) -> SqzResult<(ShotRecord, HomodyneOutcome, GaussianState)> {
        let prior = match &self.fixed_prior {
            Some(p) => p.clone(),
            None => {
                let lock = noise.phase(self.imperf.lock_jitter());
                let ancilla = prepared_ancilla(self.config, self.imperf, Some(lock))?;
                pre_measurement_state(self.config, self.imperf, &self.local_input, &ancilla)?
            }
        };
        let sigma = self.imperf.lo_jitter();
        let lo = if sigma == 0.0 { 0.0 } else { noise.phase(sigma) };
        let angle = MEASURED_ANGLE + lo;
        let prior = if self.noise_var > 0.0 {
            let u = direction(angle);
            prior.add_noise(ANCILLA, &(u * u.transpose() * self.noise_var))?
        } else {
            prior
        };
        let mean = prior.quadrature_mean(ANCILLA, angle)?;
        let std_dev = prior.marginal_variance(ANCILLA, angle)?.sqrt();
        let reading = noise.homodyne(mean, std_dev);
        let kept = prior
            .homodyne_condition(ANCILLA, angle, reading)?
            .apply_loss(SIGNAL, self.imperf.displacement_coupler)?;
        let kick = SymplecticTransform::displacement(0.0, self.coupler_gain * self.gain * reading);
        let out = kept.apply(&kick)?.apply(&self.frame)?;
        let m = out.mode_mean(0);
        Ok((
            ShotRecord {
                shot_index: index,
                outcome: reading,
                out_mean_x: m[0],
                out_mean_p: m[1],
            },
            HomodyneOutcome::new(reading, angle, ANCILLA),
            out,
        ))
    }

    fn run_batch<N: ShotNoise>(
        &self,
        range: std::ops::Range<usize>,
        noise: &mut N,
    ) -> SqzResult<(Vec<ShotRecord>, Vec<HomodyneOutcome>, MomentAccumulator)> {
        let mut shots = Vec::with_capacity(range.len());
        let mut trace = Vec::with_capacity(range.len());
        let mut acc = MomentAccumulator::default();
        for i in range {
            let (rec, outcome, state) = self.shot(i, noise)?;
            acc.push(&state.mode_mean(0), &state.mode_cov(0));
            shots.push(rec);
            trace.push(outcome);
        }
        Ok((shots, trace, acc))
    }
}

fn assemble(
    config: &ProtocolConfig,
    parts: Vec<(Vec<ShotRecord>, Vec<HomodyneOutcome>, MomentAccumulator)>,
) -> SqzResult<TrajectoryRun> {
    let mut shots = Vec::new();
    let mut trace = Vec::new();
    let mut batches = Vec::with_capacity(parts.len());
    let mut ensemble = MomentAccumulator::default();
    for (s, t, acc) in parts {
        shots.extend(s);
        trace.extend(t);
        ensemble.merge(&acc);
        batches.push(acc);
    }
    let result = ProtocolResult::new(ensemble.state()?, config, Some(trace))?;
    Ok(TrajectoryRun {
        result,
        shots,
        batches,
        ensemble,
    })
}

/// Monte Carlo feedforward: each shot samples the homodyne reading, conditions
/// the signal on it, passes the coupler and displaces `p` by the calibrated
/// gain times the reading.
///
/// Shots are split into batches of [`SHOTS_PER_BATCH`], each seeded from
/// `rng_seed` and its batch index, so the output does not depend on how
/// batches are scheduled across threads.
pub fn run_trajectory(
    config: &ProtocolConfig,
    imperf: &ImperfectionModel,
    input: &GaussianState,
    n_shots: usize,
    rng_seed: u64,
) -> SqzResult<TrajectoryRun> {
    if n_shots == 0 {
        return Err(SqzError::InvalidParameter {
            name: "n_shots",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let ctx = ShotContext::new(config, imperf, input)?;
    let n_batches = n_shots.div_ceil(SHOTS_PER_BATCH);
    let parts = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(b as u64);
            let start = b * SHOTS_PER_BATCH;
            let end = (start + SHOTS_PER_BATCH).min(n_shots);
            ctx.run_batch(start..end, &mut RngNoise(rng))
        })
        .collect::<SqzResult<Vec<_>>>()?;
    assemble(config, parts)
}

/// Sequential variant of [`run_trajectory`] drawing from a caller-supplied
/// noise source.
pub fn run_trajectory_with<N: ShotNoise>(
    config: &ProtocolConfig,
    imperf: &ImperfectionModel,
    input: &GaussianState,
    n_shots: usize,
    noise: &mut N,
) -> SqzResult<TrajectoryRun> {
    if n_shots == 0 {
        return Err(SqzError::InvalidParameter {
            name: "n_shots",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let ctx = ShotContext::new(config, imperf, input)?;
    let part = ctx.run_batch(0..n_shots, noise)?;
    assemble(config, vec![part])
}

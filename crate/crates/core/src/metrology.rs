//! Figures of merit: noise powers relative to shot noise, the fidelity of a
//! squeezer output to the ideal squeezed target, and analytic Wigner
//! functions.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{SqzError, SqzResult};
use crate::gaussian::{rotation2, GaussianState, SymplecticTransform};
use crate::squeezer::MomentAccumulator;
use crate::tomography::{GridSpec, WignerGrid};
use crate::units::SHOT_NOISE_VARIANCE;

/// Default bound on the residual correlation `|C_xp| / sqrt(V_x V_p)` of the
/// actual state once rotated to the ideal state's principal axes.
pub const COALIGNMENT_TOL: f64 = 1e-6;

/// Largest allowed `|det(4 C) - 1|` for a state treated as pure.
pub const PURITY_TOL: f64 = 1e-9;

/// Noise power of a quadrature variance in dB relative to shot noise.
pub fn noise_power_db(variance: f64) -> SqzResult<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(SqzError::InvalidParameter {
            name: "variance",
            value: variance,
            reason: "noise power needs a positive, finite variance",
        });
    }
    Ok(10.0 * (variance / SHOT_NOISE_VARIANCE).log10())
}

/// The input squeezed by the unitary `diag(e^{-r}, e^{r})`, i.e. what a
/// perfect squeezer with `T = e^{-2r}` would output.
pub fn ideal_squeezed_target(input: &GaussianState, r: f64) -> SqzResult<GaussianState> {
    input.require_single_mode()?;
    if !r.is_finite() {
        return Err(SqzError::InvalidParameter {
            name: "r",
            value: r,
            reason: "squeezing parameter must be finite",
        });
    }
    input.apply(&SymplecticTransform::squeeze(r))
}

/// Fidelity of the measure-and-feedforward squeezer with a vacuum ancilla,
/// `sqrt(2T / (1 + T))`, for any vacuum-noise input.
pub fn classical_limit_fidelity(transmittance: f64) -> SqzResult<f64> {
    crate::squeezer::nominal_gain(transmittance)?;
    Ok((2.0 * transmittance / (1.0 + transmittance)).sqrt())
}

/// Fidelity of a mixed single-mode Gaussian to a pure one, with the
/// ingredients of the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    /// `1 / (2 sqrt((V_x + V_x') (V_p + V_p')))`
    pub variance_factor: f64,
    /// `exp(-dx^2 / (2 (V_x + V_x')) - dp^2 / (2 (V_p + V_p')))`
    pub exponential_factor: f64,
    /// Rotation taking the lab frame into the common principal frame.
    pub principal_angle: f64,
    /// Residual normalized correlation of the actual state in that frame.
    pub coalignment_residual: f64,
    /// Means and variances in the principal frame.
    pub ideal_mean: [f64; 2],
    pub actual_mean: [f64; 2],
    pub ideal_variances: [f64; 2],
    pub actual_variances: [f64; 2],
}

/// Gaussian fidelity between a pure `ideal` state and an `actual` state,
/// evaluated in the ideal state's principal frame (where both covariances
/// must be diagonal):
///
/// ```text
/// F = exp(-dx^2/(2 Sx) - dp^2/(2 Sp)) / (2 sqrt(Sx Sp)),  S = V_ideal + V_actual
/// ```
pub fn fidelity_gaussian(ideal: &GaussianState, actual: &GaussianState) -> SqzResult<FidelityReport> {
    fidelity_gaussian_with_tolerance(ideal, actual, COALIGNMENT_TOL)
}

/// [`fidelity_gaussian`] with an explicit co-alignment tolerance. Estimated
/// moments carry statistical correlations; a loose tolerance accepts them and
/// drops the off-diagonal term.
pub fn fidelity_gaussian_with_tolerance(
    ideal: &GaussianState,
    actual: &GaussianState,
    coalignment_tol: f64,
) -> SqzResult<FidelityReport> {
    ideal.require_single_mode()?;
    actual.require_single_mode()?;
    if (ideal.purity_determinant() - 1.0).abs() > PURITY_TOL {
        return Err(SqzError::InvalidState(format!(
            "ideal state must be pure, det(4C) = {}",
            ideal.purity_determinant()
        )));
    }
    let ci = ideal.mode_cov(0);
    let ca = actual.mode_cov(0);
    // An isotropic ideal has no preferred axes; borrow the actual's.
    let reference = if is_isotropic(&ci) { ca } else { ci };
    let angle = principal_angle(&reference);
    let rot = rotation2(angle).transpose();
    let (mi, ma) = (rot * ideal.mode_mean(0), rot * actual.mode_mean(0));
    let (ci, ca) = (rot * ci * rot.transpose(), rot * ca * rot.transpose());
    let residual = ca[(0, 1)].abs() / (ca[(0, 0)] * ca[(1, 1)]).sqrt();
    if !(residual <= coalignment_tol) {
        return Err(SqzError::NotCoaligned { residual });
    }
    let sx = ci[(0, 0)] + ca[(0, 0)];
    let sp = ci[(1, 1)] + ca[(1, 1)];
    let d: Vector2<f64> = mi - ma;
    let variance_factor = 1.0 / (2.0 * (sx * sp).sqrt());
    let exponential_factor = (-d[0] * d[0] / (2.0 * sx) - d[1] * d[1] / (2.0 * sp)).exp();
    Ok(FidelityReport {
        fidelity: variance_factor * exponential_factor,
        variance_factor,
        exponential_factor,
        principal_angle: angle,
        coalignment_residual: residual,
        ideal_mean: [mi[0], mi[1]],
        actual_mean: [ma[0], ma[1]],
        ideal_variances: [ci[(0, 0)], ci[(1, 1)]],
        actual_variances: [ca[(0, 0)], ca[(1, 1)]],
    })
}

fn is_isotropic(c: &Matrix2<f64>) -> bool {
    let scale = c.trace().abs().max(f64::MIN_POSITIVE);
    ((c[(0, 0)] - c[(1, 1)]).abs() + 2.0 * c[(0, 1)].abs()) <= 1e-12 * scale
}

/// Angle of the eigenvector belonging to the smaller eigenvalue, in
/// `(-pi/2, pi/2]`. Zero for already-diagonal matrices with `C_xx <= C_pp`.
fn principal_angle(c: &Matrix2<f64>) -> f64 {
    if c[(0, 1)] == 0.0 {
        return if c[(0, 0)] <= c[(1, 1)] { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    }
    let eig = SymmetricEigen::new(*c);
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let v = eig.eigenvectors.column(k);
    let mut a = v[1].atan2(v[0]);
    if a <= -std::f64::consts::FRAC_PI_2 {
        a += std::f64::consts::PI;
    } else if a > std::f64::consts::FRAC_PI_2 {
        a -= std::f64::consts::PI;
    }
    a
}

/// Undoes a pure-loss channel of efficiency `eta` on a single-mode state:
/// `mean / sqrt(eta)`, `(C - (1 - eta) I/4) / eta`. Fails when the result
/// is unphysical, i.e. when the data are noisier than the declared loss
/// allows.
pub fn infer_before_loss(measured: &GaussianState, eta: f64) -> SqzResult<GaussianState> {
    measured.require_single_mode()?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(SqzError::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "efficiency must lie in (0, 1]",
        });
    }
    let mean = measured.mode_mean(0) / eta.sqrt();
    let cov = (measured.mode_cov(0) - Matrix2::identity() * ((1.0 - eta) * SHOT_NOISE_VARIANCE)) / eta;
    let s = GaussianState::single_mode(mean, cov);
    s.validate()?;
    Ok(s)
}

/// Wigner function of a single-mode Gaussian state on a grid.
pub fn analytic_wigner(state: &GaussianState, spec: GridSpec) -> SqzResult<WignerGrid> {
    state.require_single_mode()?;
    let c = state.mode_cov(0);
    let det = c.determinant();
    let inv = c.try_inverse().filter(|_| det > 0.0).ok_or(SqzError::SingularCovariance)?;
    let m = state.mode_mean(0);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    WignerGrid::from_fn(spec, |x, p| {
        let d = Vector2::new(x - m[0], p - m[1]);
        norm * (-0.5 * (d.transpose() * inv * d)[0]).exp()
    })
}

/// Spread of the fidelity over bootstrap resamples of trajectory batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub fidelity: f64,
    pub std_dev: f64,
    /// 2.5 % and 97.5 % quantiles.
    pub interval: [f64; 2],
    pub resamples: usize,
}

/// Fidelity of the pooled batches to `ideal`, with a bootstrap spread
/// obtained by resampling whole batches with replacement.
pub fn bootstrap_fidelity(
    ideal: &GaussianState,
    batches: &[MomentAccumulator],
    resamples: usize,
    seed: u64,
) -> SqzResult<BootstrapSummary> {
    if batches.is_empty() || resamples < 2 {
        return Err(SqzError::Unsupported(
            "bootstrap needs at least one batch and two resamples".into(),
        ));
    }
    let fid = |acc: &MomentAccumulator| -> SqzResult<f64> {
        Ok(fidelity_gaussian_with_tolerance(ideal, &acc.state()?, f64::INFINITY)?.fidelity)
    };
    let mut pooled = MomentAccumulator::default();
    batches.iter().for_each(|b| pooled.merge(b));
    let point = fid(&pooled)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = MomentAccumulator::default();
        for _ in 0..batches.len() {
            acc.merge(&batches[rng.random_range(0..batches.len())]);
        }
        values.push(fid(&acc)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    values.sort_by(f64::total_cmp);
    let q = |f: f64| values[((f * (n - 1.0)).round() as usize).min(values.len() - 1)];
    Ok(BootstrapSummary {
        fidelity: point,
        std_dev: var.sqrt(),
        interval: [q(0.025), q(0.975)],
        resamples,
    })
}

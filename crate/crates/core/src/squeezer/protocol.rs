use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use super::config::{ImperfectionModel, ProtocolConfig};
use crate::error::{SqzError, SqzResult};
use crate::gaussian::{GaussianState, HomodyneOutcome, SymplecticTransform};
use crate::units::SHOT_NOISE_VARIANCE;

/// Mode indices inside the two-mode working state.
pub(crate) const SIGNAL: usize = 0;
pub(crate) const ANCILLA: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolResult {
    pub output: GaussianState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homodyne_trace: Option<Vec<HomodyneOutcome>>,
    /// Noise reduction of the squeezed quadrature below shot noise, in dB
    /// (positive when squeezed).
    pub effective_squeezing_db: f64,
}

impl ProtocolResult {
    pub(crate) fn new(
        output: GaussianState,
        config: &ProtocolConfig,
        homodyne_trace: Option<Vec<HomodyneOutcome>>,
    ) -> SqzResult<Self> {
        let v = output.marginal_variance(0, config.squeeze_angle)?;
        Ok(Self {
            output,
            homodyne_trace,
            effective_squeezing_db: 10.0 * (SHOT_NOISE_VARIANCE / v).log10(),
        })
    }
}

/// Closed-form output of the ideal squeezer with nominal gain:
///
/// ```text
/// x'' = sqrt(T) x + sqrt(1-T) e^{-r_a} x_vac
/// p'' = p / sqrt(T)
/// ```
///
/// in the frame of `config.squeeze_angle`. Infinite ancilla squeezing gives
/// the unitary squeeze with `r = -ln sqrt(T)`.
pub fn ideal_output_map(config: &ProtocolConfig, input: &GaussianState) -> SqzResult<GaussianState> {
    config.validate()?;
    input.require_single_mode()?;
    if !config.uses_nominal_gain()? {
        return Err(SqzError::Unsupported(
            "the closed-form map requires the nominal feedforward gain".into(),
        ));
    }
    let t = config.transmittance;
    let frame = config.squeeze_angle;
    let local = rotate(input, -frame);
    let m = local.mode_mean(0);
    let c = local.mode_cov(0);
    let scale = Matrix2::new(t.sqrt(), 0.0, 0.0, 1.0 / t.sqrt());
    let mut cov = scale * c * scale;
    cov[(0, 0)] += (1.0 - t) * config.ancilla_squeezed_variance();
    let out = GaussianState::single_mode(scale * m, cov);
    Ok(rotate(&out, frame))
}

fn rotate(state: &GaussianState, theta: f64) -> GaussianState {
    if theta == 0.0 {
        return state.clone();
    }
    state
        .apply(&SymplecticTransform::phase_rotation(theta))
        .expect("single-mode rotation on a single-mode state")
}

/// Cosine and sine moments of a zero-mean Gaussian phase `delta` with
/// standard deviation `sigma`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PhaseMoments {
    /// E[cos d]
    pub cos: f64,
    /// E[cos^2 d]
    pub cos2: f64,
    /// E[sin^2 d]
    pub sin2: f64,
}

impl PhaseMoments {
    pub fn new(sigma: f64) -> Self {
        let damp = (-2.0 * sigma * sigma).exp();
        Self {
            cos: (-0.5 * sigma * sigma).exp(),
            cos2: 0.5 * (1.0 + damp),
            sin2: 0.5 * (1.0 - damp),
        }
    }
}

/// Covariance averaged over a random rotation of standard deviation `sigma`.
/// The isotropic part is untouched; the traceless part shrinks by
/// `e^{-2 sigma^2}`.
pub(crate) fn dephase(cov: &Matrix2<f64>, sigma: f64) -> Matrix2<f64> {
    if sigma == 0.0 {
        return *cov;
    }
    let iso = 0.5 * cov.trace();
    let damp = (-2.0 * sigma * sigma).exp();
    Matrix2::identity() * iso + (cov - Matrix2::identity() * iso) * damp
}

/// Ancilla after lock jitter (averaged or a fixed offset) and propagation loss.
pub(crate) fn prepared_ancilla(
    config: &ProtocolConfig,
    imperf: &ImperfectionModel,
    lock_offset: Option<f64>,
) -> SqzResult<GaussianState> {
    let sq = GaussianState::squeezed_vacuum(config.ancilla_squeezing, lock_offset.unwrap_or(0.0));
    let sq = match lock_offset {
        Some(_) => sq,
        None => {
            let cov = dephase(&sq.mode_cov(0), imperf.lock_jitter());
            GaussianState::single_mode(Vector2::zeros(), cov)
        }
    };
    sq.apply_loss(0, imperf.propagation_efficiency)
}

/// Two-mode state just before the feedforward detector, in the squeezer's
/// own frame: signal and ancilla mixed on the splitter, then the reflected
/// port attenuated by the detection efficiency.
pub(crate) fn pre_measurement_state(
    config: &ProtocolConfig,
    imperf: &ImperfectionModel,
    local_input: &GaussianState,
    ancilla: &GaussianState,
) -> SqzResult<GaussianState> {
    let joint = local_input.tensor(ancilla);
    let bs = SymplecticTransform::beam_splitter(2, config.transmittance, SIGNAL, ANCILLA)?;
    joint
        .apply(&bs)?
        .apply_loss(ANCILLA, imperf.measurement_efficiency())
}

/// Feedforward gain as applied to the efficiency-rescaled homodyne reading.
pub(crate) fn applied_gain(config: &ProtocolConfig, imperf: &ImperfectionModel) -> SqzResult<f64> {
    Ok(config.gain()? * (1.0 + imperf.gain_error))
}

/// Deterministic (ensemble) output of the squeezer with imperfections.
///
/// The homodyne-plus-feedforward step is averaged over outcomes, which turns
/// it into the linear channel `r_s -> r_s + G (u^T r_a + n) / sqrt(eta)` on
/// the pre-measurement state; the electronic noise `n` and, when present, the
/// local-oscillator phase noise in `u` are averaged at the level of first and
/// second moments. The displacement coupler then attenuates the signal, with
/// the displacement calibrated against the transmitted beam.
pub fn run_deterministic(
    config: &ProtocolConfig,
    imperf: &ImperfectionModel,
    input: &GaussianState,
) -> SqzResult<ProtocolResult> {
    config.validate()?;
    imperf.validate()?;
    input.require_single_mode()?;
    if !config.ancilla_squeezing.is_finite() {
        return Err(SqzError::Unsupported(
            "an infinitely squeezed ancilla has no finite-energy state; use ideal_output_map".into(),
        ));
    }
    let frame = config.squeeze_angle;
    let local = rotate(input, -frame);
    let ancilla = prepared_ancilla(config, imperf, None)?;
    let pre = pre_measurement_state(config, imperf, &local, &ancilla)?;

    let eta = imperf.measurement_efficiency();
    let g = applied_gain(config, imperf)? / eta.sqrt();
    let mu = Vector4::from_column_slice(pre.mean().as_slice());
    let c = Matrix4::from_column_slice(pre.cov().as_slice());

    // y = (A0 + cos(d) Ac + sin(d) As) r, measuring p rotated by d
    let mut a0 = Matrix2x4::zeros();
    a0[(0, 0)] = 1.0;
    a0[(1, 1)] = 1.0;
    let mut ac = Matrix2x4::zeros();
    ac[(1, 3)] = g;
    let mut as_ = Matrix2x4::zeros();
    as_[(1, 2)] = -g;

    let sigma = imperf.lo_jitter();
    let (mean, mut cov) = if sigma == 0.0 {
        let a = a0 + ac;
        (a * mu, a * c * a.transpose())
    } else {
        let pm = PhaseMoments::new(sigma);
        let second = c + mu * mu.transpose();
        let mean = (a0 + ac * pm.cos) * mu;
        let raw = a0 * second * a0.transpose()
            + (a0 * second * ac.transpose() + ac * second * a0.transpose()) * pm.cos
            + ac * second * ac.transpose() * pm.cos2
            + as_ * second * as_.transpose() * pm.sin2;
        (mean, raw - mean * mean.transpose())
    };
    cov[(1, 1)] += g * g * imperf.electronic_noise_variance();
    let cov = (cov + cov.transpose()) * 0.5;

    let out = GaussianState::single_mode(mean, cov).apply_loss(0, imperf.displacement_coupler)?;
    let out = rotate(&out, frame);
    out.validate()?;
    ProtocolResult::new(out, config, None)
}

/// Ensemble measured-arm angle for the feedforward homodyne, `pi/2` (the `p`
/// quadrature) in the squeezer frame.
pub(crate) const MEASURED_ANGLE: f64 = FRAC_PI_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::db_to_nepers;
    use std::f64::consts::LN_2;

    fn moments_close(a: &GaussianState, b: &GaussianState, tol: f64) -> bool {
        (a.mean() - b.mean()).amax() <= tol && (a.cov() - b.cov()).amax() <= tol
    }

    #[test]
    fn infinite_ancilla_is_unitary_squeeze() {
        let cfg = ProtocolConfig::new(0.25, f64::INFINITY).unwrap();
        let input = GaussianState::coherent(1.2, -0.7);
        let out = ideal_output_map(&cfg, &input).unwrap();
        assert!((out.mode_mean(0) - Vector2::new(0.6, -1.4)).amax() < 1e-15);
        let target = input.apply(&SymplecticTransform::squeeze(LN_2)).unwrap();
        assert!(moments_close(&out, &target, 1e-15));
        assert!((out.purity_determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_ancilla_curve_value() {
        let cfg = ProtocolConfig::with_ancilla_db(0.25, 5.1).unwrap();
        let out = ideal_output_map(&cfg, &GaussianState::vacuum(1).unwrap()).unwrap();
        // 0.25 * 0.25 + 0.75 * 0.25 * 10^{-0.51}
        let expected = 0.0625 + 0.75 * 0.25 * 10f64.powf(-0.51);
        assert!((out.mode_cov(0)[(0, 0)] - expected).abs() < 1e-15);
        assert!((out.mode_cov(0)[(0, 0)] - 0.120_449).abs() < 1e-5);
        let db = 10.0 * (out.mode_cov(0)[(0, 0)] / 0.25).log10();
        assert!((db + 3.17).abs() < 0.005);
    }

    #[test]
    fn unit_transmittance_is_identity() {
        let cfg = ProtocolConfig::new(1.0, 0.3).unwrap();
        let input = GaussianState::squeezed_vacuum(0.2, 0.4)
            .apply(&SymplecticTransform::displacement(0.5, 0.1))
            .unwrap();
        let out = ideal_output_map(&cfg, &input).unwrap();
        assert!(moments_close(&out, &input, 1e-15));
    }

    #[test]
    fn ideal_map_rejects_off_nominal_gain() {
        let mut cfg = ProtocolConfig::new(0.5, 0.3).unwrap();
        cfg.gain = Some(-0.9);
        assert!(ideal_output_map(&cfg, &GaussianState::vacuum(1).unwrap()).is_err());
        assert!(ideal_output_map(
            &ProtocolConfig::new(0.5, 0.3).unwrap(),
            &GaussianState::vacuum(2).unwrap()
        )
        .is_err());
    }

    #[test]
    fn deterministic_matches_closed_form_without_imperfections() {
        let input = GaussianState::coherent(1.5, -0.5);
        for &(t, ra) in &[(0.75, 0.0), (0.5, db_to_nepers(5.1)), (0.25, 2.0), (1.0, 0.7)] {
            let cfg = ProtocolConfig::new(t, ra).unwrap();
            let det = run_deterministic(&cfg, &ImperfectionModel::none(), &input).unwrap();
            let ideal = ideal_output_map(&cfg, &input).unwrap();
            assert!(moments_close(&det.output, &ideal, 1e-12), "T={t}");
        }
    }

    #[test]
    fn vacuum_ancilla_gives_shot_noise_in_x() {
        let cfg = ProtocolConfig::new(0.3, 0.0).unwrap();
        let out = run_deterministic(&cfg, &ImperfectionModel::none(), &GaussianState::vacuum(1).unwrap())
            .unwrap();
        assert!((out.output.mode_cov(0)[(0, 0)] - 0.25).abs() < 1e-15);
        assert!(out.effective_squeezing_db.abs() < 1e-12);
    }

    #[test]
    fn rotated_frame_squeezes_requested_quadrature() {
        let mut cfg = ProtocolConfig::new(0.25, 1.0).unwrap();
        cfg.squeeze_angle = 0.6;
        let input = GaussianState::coherent(0.4, 0.9);
        let det = run_deterministic(&cfg, &ImperfectionModel::none(), &input).unwrap();
        let ideal = ideal_output_map(&cfg, &input).unwrap();
        assert!(moments_close(&det.output, &ideal, 1e-12));
        let along = det.output.marginal_variance(0, 0.6).unwrap();
        assert!((along - (0.0625 + 0.75 * 0.25 * (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn infinite_ancilla_rejected_by_ensemble_channel() {
        let cfg = ProtocolConfig::new(0.5, f64::INFINITY).unwrap();
        assert!(run_deterministic(&cfg, &ImperfectionModel::none(), &GaussianState::vacuum(1).unwrap()).is_err());
    }

    #[test]
    fn dephasing_preserves_trace() {
        let c = Matrix2::new(0.08, 0.01, 0.01, 0.8);
        let d = dephase(&c, 0.3);
        assert!((d.trace() - c.trace()).abs() < 1e-15);
        assert!(d[(0, 0)] > c[(0, 0)]);
        assert_eq!(dephase(&c, 0.0), c);
        // oracle: average R(d) C R(d)^T over a fine quadrature of the Gaussian
        let sigma: f64 = 0.3;
        let n = 4001;
        let mut acc = Matrix2::zeros();
        let mut wsum = 0.0;
        for k in 0..n {
            let d = -8.0 * sigma + 16.0 * sigma * k as f64 / (n - 1) as f64;
            let w = (-0.5 * d * d / (sigma * sigma)).exp();
            let r = crate::gaussian::rotation2(d);
            acc += r * c * r.transpose() * w;
            wsum += w;
        }
        assert!((acc / wsum - dephase(&c, sigma)).amax() < 1e-12);
    }
}

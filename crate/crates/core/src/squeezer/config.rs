use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, SqzError, SqzResult};
use crate::units::{db_to_nepers, db_to_power_ratio, SHOT_NOISE_VARIANCE};

/// Feedforward gain that cancels the ancilla's anti-squeezed quadrature,
/// `-sqrt((1-T)/T)`.
pub fn nominal_gain(transmittance: f64) -> SqzResult<f64> {
    check_transmittance(transmittance)?;
    Ok(-((1.0 - transmittance) / transmittance).sqrt())
}

/// Squeezing parameter realized by a splitter of transmittance `T`,
/// `r = -ln sqrt(T)`.
pub fn r_from_transmittance(transmittance: f64) -> SqzResult<f64> {
    check_transmittance(transmittance)?;
    Ok(-transmittance.sqrt().ln())
}

/// Squeezing level in dB, `-10 log10 T`.
pub fn squeezing_db_from_transmittance(transmittance: f64) -> SqzResult<f64> {
    check_transmittance(transmittance)?;
    Ok(-10.0 * transmittance.log10())
}

/// Inverse of [`r_from_transmittance`], `T = e^{-2r}`.
pub fn transmittance_from_r(r: f64) -> SqzResult<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(SqzError::InvalidParameter {
            name: "r",
            value: r,
            reason: "squeezing parameter must be finite and non-negative",
        });
    }
    Ok((-2.0 * r).exp())
}

fn check_transmittance(t: f64) -> SqzResult<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(SqzError::InvalidParameter {
            name: "transmittance",
            value: t,
            reason: "must lie in (0, 1]",
        })
    }
}

/// Settings of one squeezer instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub transmittance: f64,
    /// Ancilla squeezing parameter in nepers. May be `+inf` for the ideal
    /// closed-form map.
    pub ancilla_squeezing: f64,
    /// Feedforward gain; `None` selects [`nominal_gain`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// Angle of the squeezed quadrature. 0 squeezes `x` and measures `p`.
    #[serde(default)]
    pub squeeze_angle: f64,
}

impl ProtocolConfig {
    pub fn new(transmittance: f64, ancilla_squeezing: f64) -> SqzResult<Self> {
        let c = Self {
            transmittance,
            ancilla_squeezing,
            gain: None,
            squeeze_angle: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_ancilla_db(transmittance: f64, ancilla_db: f64) -> SqzResult<Self> {
        Self::new(transmittance, db_to_nepers(ancilla_db))
    }

    pub fn validate(&self) -> SqzResult<()> {
        check_transmittance(self.transmittance)?;
        if !(self.ancilla_squeezing >= 0.0) {
            return Err(SqzError::InvalidParameter {
                name: "ancilla_squeezing",
                value: self.ancilla_squeezing,
                reason: "must be non-negative",
            });
        }
        if let Some(g) = self.gain {
            if !g.is_finite() {
                return Err(SqzError::InvalidParameter {
                    name: "gain",
                    value: g,
                    reason: "must be finite",
                });
            }
        }
        if !self.squeeze_angle.is_finite() {
            return Err(SqzError::InvalidParameter {
                name: "squeeze_angle",
                value: self.squeeze_angle,
                reason: "must be finite",
            });
        }
        Ok(())
    }

    pub fn gain(&self) -> SqzResult<f64> {
        match self.gain {
            Some(g) => Ok(g),
            None => nominal_gain(self.transmittance),
        }
    }

    pub fn uses_nominal_gain(&self) -> SqzResult<bool> {
        let nominal = nominal_gain(self.transmittance)?;
        Ok(self.gain.is_none_or(|g| (g - nominal).abs() <= 1e-12))
    }

    /// Variance of the ancilla's squeezed quadrature, `e^{-2 r_a}/4`.
    pub fn ancilla_squeezed_variance(&self) -> f64 {
        SHOT_NOISE_VARIANCE * (-2.0 * self.ancilla_squeezing).exp()
    }
}

/// Loss and noise knobs of the physical setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImperfectionModel {
    /// Mode matching of the feedforward homodyne detector, visibility squared.
    pub homodyne_efficiency: f64,
    pub detector_efficiency: f64,
    /// Ancilla transmission on its way to the splitter.
    pub propagation_efficiency: f64,
    /// Electronic noise of the feedforward detector relative to shot noise,
    /// in dB. `None` disables it.
    pub electronic_noise_db: Option<f64>,
    /// Standard deviation of zero-mean Gaussian phase noise, applied
    /// independently to the ancilla lock and to the feedforward local
    /// oscillator.
    pub phase_jitter_rad: f64,
    /// Separate phase-noise level for the feedforward local oscillator;
    /// `None` uses `phase_jitter_rad`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_phase_jitter_rad: Option<f64>,
    /// Transmittance of the coupler that merges the displacement beam.
    pub displacement_coupler: f64,
    /// Relative error of the electronic gain, `g -> g (1 + gain_error)`.
    pub gain_error: f64,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        Self {
            homodyne_efficiency: 0.96 * 0.96,
            detector_efficiency: 0.99,
            propagation_efficiency: 0.96,
            electronic_noise_db: Some(-19.0),
            phase_jitter_rad: 0.0,
            lo_phase_jitter_rad: None,
            displacement_coupler: 0.99,
            gain_error: 0.0,
        }
    }
}

impl ImperfectionModel {
    /// A lossless, noiseless apparatus.
    pub fn none() -> Self {
        Self {
            homodyne_efficiency: 1.0,
            detector_efficiency: 1.0,
            propagation_efficiency: 1.0,
            electronic_noise_db: None,
            phase_jitter_rad: 0.0,
            lo_phase_jitter_rad: None,
            displacement_coupler: 1.0,
            gain_error: 0.0,
        }
    }

    /// Default losses plus ancilla-lock phase noise and a feedforward gain
    /// set too high, sized so that for the default coherent input and a
    /// 5.1 dB ancilla the squeezed-quadrature noise and the fidelity at
    /// `T = 0.75, 0.5, 0.25` come out near 0.7/1.6/2.5 dB and 0.94/0.89/0.78.
    pub fn degraded_feedforward() -> Self {
        Self {
            phase_jitter_rad: DEGRADED_PHASE_JITTER_RAD,
            lo_phase_jitter_rad: Some(0.0),
            gain_error: DEGRADED_GAIN_ERROR,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "none" | "ideal" => Some(Self::none()),
            "default" => Some(Self::default()),
            "degraded-feedforward" => Some(Self::degraded_feedforward()),
            _ => None,
        }
    }

    pub fn validate(&self) -> SqzResult<()> {
        check_unit_interval("homodyne_efficiency", self.homodyne_efficiency)?;
        check_unit_interval("detector_efficiency", self.detector_efficiency)?;
        check_unit_interval("propagation_efficiency", self.propagation_efficiency)?;
        check_unit_interval("displacement_coupler", self.displacement_coupler)?;
        if self.measurement_efficiency() <= 0.0 {
            return Err(SqzError::InvalidParameter {
                name: "homodyne_efficiency",
                value: self.measurement_efficiency(),
                reason: "feedforward detection efficiency must be positive",
            });
        }
        if let Some(db) = self.electronic_noise_db {
            if !db.is_finite() {
                return Err(SqzError::InvalidParameter {
                    name: "electronic_noise_db",
                    value: db,
                    reason: "must be finite (omit to disable)",
                });
            }
        }
        for (name, sigma) in [
            ("phase_jitter_rad", self.phase_jitter_rad),
            ("lo_phase_jitter_rad", self.lo_jitter()),
        ] {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(SqzError::InvalidParameter {
                    name,
                    value: sigma,
                    reason: "must be finite and non-negative",
                });
            }
        }
        if !self.gain_error.is_finite() {
            return Err(SqzError::InvalidParameter {
                name: "gain_error",
                value: self.gain_error,
                reason: "must be finite",
            });
        }
        Ok(())
    }

    /// Phase-noise level of the ancilla lock.
    pub fn lock_jitter(&self) -> f64 {
        self.phase_jitter_rad
    }

    /// Phase-noise level of the feedforward local oscillator.
    pub fn lo_jitter(&self) -> f64 {
        self.lo_phase_jitter_rad.unwrap_or(self.phase_jitter_rad)
    }

    /// Total efficiency of the feedforward homodyne detection.
    pub fn measurement_efficiency(&self) -> f64 {
        self.homodyne_efficiency * self.detector_efficiency
    }

    /// Variance of the electronic noise added to each homodyne reading.
    pub fn electronic_noise_variance(&self) -> f64 {
        self.electronic_noise_db
            .map_or(0.0, |db| SHOT_NOISE_VARIANCE * db_to_power_ratio(db))
    }
}

/// Ancilla-lock phase noise of [`ImperfectionModel::degraded_feedforward`].
pub const DEGRADED_PHASE_JITTER_RAD: f64 = 0.14;
/// Relative gain error of [`ImperfectionModel::degraded_feedforward`].
pub const DEGRADED_GAIN_ERROR: f64 = 0.04;

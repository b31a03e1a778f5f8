//! Unit conventions shared across the crate.
//!
//! Quadratures are normalized so that the vacuum standard deviation is 1/2,
//! i.e. the shot-noise variance is [`SHOT_NOISE_VARIANCE`]. All decibel values
//! refer to that level.

/// Vacuum quadrature variance.
pub const SHOT_NOISE_VARIANCE: f64 = 0.25;

/// Converts a squeezing level in dB to the exponent `r` of the quadrature
/// scaling `e^{-r}`.
pub fn db_to_nepers(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

pub fn nepers_to_db(r: f64) -> f64 {
    r * 20.0 / std::f64::consts::LN_10
}

/// Power ratio for a dB value, `10^{db/10}`.
pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

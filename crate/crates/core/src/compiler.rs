//! Compilation of single-mode Gaussian unitaries into the gate set the
//! squeezer completes: phase rotations, one measurement-based squeezer and a
//! displacement.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use crate::error::{SqzError, SqzResult};
use crate::gaussian::{rotation2, GaussianState, SymplecticTransform, SYMPLECTIC_TOL};
use crate::squeezer::{
    ideal_output_map, nominal_gain, run_deterministic, squeezing_db_from_transmittance, transmittance_from_r,
    ImperfectionModel, ProtocolConfig,
};
use crate::units::{db_to_nepers, wrap_angle};

/// Squeezing below this is treated as none.
pub const MIN_SQUEEZING: f64 = 1e-12;

/// `S = R(theta_post) diag(e^{-r}, e^{r}) R(theta_pre)` with `r >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub theta_post: f64,
    pub r: f64,
    pub theta_pre: f64,
}

impl EulerAngles {
    pub fn matrix(&self) -> Matrix2<f64> {
        let s = Matrix2::new((-self.r).exp(), 0.0, 0.0, self.r.exp());
        rotation2(self.theta_post) * s * rotation2(self.theta_pre)
    }
}

/// Euler (singular-value) form of a 2x2 symplectic matrix.
///
/// Angles lie in `(-pi, pi]` with `theta_pre` further restricted to
/// `(-pi/2, pi/2]` (the pair `(theta_pre + pi, theta_post + pi)` describes the
/// same matrix). A pure rotation returns `theta_pre = 0`.
pub fn euler_decompose(s: &Matrix2<f64>) -> SqzResult<EulerAngles> {
    let deviation = (s.determinant() - 1.0).abs();
    if !(deviation <= SYMPLECTIC_TOL) {
        return Err(SqzError::NonSymplectic { deviation });
    }
    let (a, b, c, d) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    // rotation part E I + H J and reflection part F Z + G X
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = e.hypot(h);
    let refl = f.hypot(g);
    let r = (q + refl).ln();
    if r <= MIN_SQUEEZING {
        return Ok(EulerAngles {
            theta_post: wrap_angle(c.atan2(a)),
            r: 0.0,
            theta_pre: 0.0,
        });
    }
    let a_refl = g.atan2(f);
    let a_rot = h.atan2(e);
    let mut theta_pre = 0.5 * (a_rot - a_refl) - FRAC_PI_2;
    let mut theta_post = 0.5 * (a_rot + a_refl) + FRAC_PI_2;
    theta_pre = wrap_angle(theta_pre);
    if !(theta_pre > -FRAC_PI_2 && theta_pre <= FRAC_PI_2) {
        theta_pre = wrap_angle(theta_pre + PI);
        theta_post += PI;
    }
    Ok(EulerAngles {
        theta_post: wrap_angle(theta_post),
        r,
        theta_pre,
    })
}

/// One element of a [`GatePlan`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gate {
    Rotation {
        theta: f64,
    },
    /// Squeezes `x` by `e^{-r}`, realized with a splitter of transmittance
    /// `e^{-2r}` and the matching feedforward gain.
    Squeezer {
        r: f64,
        transmittance: f64,
        gain: f64,
    },
    Displacement {
        dx: f64,
        dp: f64,
    },
}

impl Gate {
    pub fn squeezer(r: f64) -> SqzResult<Self> {
        let transmittance = transmittance_from_r(r)?;
        if transmittance <= 0.0 {
            return Err(SqzError::InvalidParameter {
                name: "r",
                value: r,
                reason: "squeezing too strong for a physical transmittance",
            });
        }
        Ok(Gate::Squeezer {
            r,
            transmittance,
            gain: nominal_gain(transmittance)?,
        })
    }

    pub fn transform(&self) -> SymplecticTransform {
        match *self {
            Gate::Rotation { theta } => SymplecticTransform::phase_rotation(theta),
            Gate::Squeezer { r, .. } => SymplecticTransform::squeeze(r),
            Gate::Displacement { dx, dp } => SymplecticTransform::displacement(dx, dp),
        }
    }
}

/// An ordered sequence of gates, first gate applied first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GatePlan {
    pub gates: Vec<Gate>,
}

impl GatePlan {
    /// The affine map the plan implements.
    pub fn transform(&self) -> SymplecticTransform {
        self.gates
            .iter()
            .fold(SymplecticTransform::identity(1), |acc, g| {
                acc.then(&g.transform()).expect("single-mode gates compose")
            })
    }

    pub fn squeezer_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Squeezer { .. }))
            .count()
    }

    /// Checks the plan's physical settings.
    pub fn validate(&self) -> SqzResult<()> {
        for g in &self.gates {
            match *g {
                Gate::Rotation { theta } if !theta.is_finite() => {
                    return Err(SqzError::InvalidParameter {
                        name: "theta",
                        value: theta,
                        reason: "must be finite",
                    })
                }
                Gate::Squeezer { r, transmittance, gain } => {
                    let expected = Gate::squeezer(r)?;
                    if let Gate::Squeezer {
                        transmittance: t,
                        gain: g,
                        ..
                    } = expected
                    {
                        if (t - transmittance).abs() > 1e-12 || (g - gain).abs() > 1e-12 * g.abs().max(1.0) {
                            return Err(SqzError::InvalidParameter {
                                name: "transmittance",
                                value: transmittance,
                                reason: "squeezer settings disagree with r",
                            });
                        }
                    }
                }
                Gate::Displacement { dx, dp } if !(dx.is_finite() && dp.is_finite()) => {
                    return Err(SqzError::InvalidParameter {
                        name: "dx",
                        value: if dx.is_finite() { dp } else { dx },
                        reason: "must be finite",
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Human-readable table of the plan.
    pub fn to_table(&self) -> String {
        let mut out = String::from("step  gate          settings\n");
        if self.gates.is_empty() {
            out.push_str("-     identity\n");
        }
        for (k, g) in self.gates.iter().enumerate() {
            let _ = match *g {
                Gate::Rotation { theta } => writeln!(out, "{:<5} rotation      theta = {:.6} rad", k + 1, theta),
                Gate::Squeezer { r, transmittance, gain } => writeln!(
                    out,
                    "{:<5} squeezer      r = {:.6} ({:.4} dB), T = {:.6}, gain = {:.6}",
                    k + 1,
                    r,
                    squeezing_db_from_transmittance(transmittance).unwrap_or(f64::NAN),
                    transmittance,
                    gain
                ),
                Gate::Displacement { dx, dp } => {
                    writeln!(out, "{:<5} displacement  dx = {:.6}, dp = {:.6}", k + 1, dx, dp)
                }
            };
        }
        out
    }
}

/// Plan `[rotation(theta_pre), squeezer(r), rotation(theta_post),
/// displacement(d)]` implementing `x -> S x + d`, with trivial gates left
/// out.
pub fn plan_from_unitary(s: &Matrix2<f64>, d: &Vector2<f64>) -> SqzResult<GatePlan> {
    let euler = euler_decompose(s)?;
    let mut gates = Vec::with_capacity(4);
    if euler.theta_pre != 0.0 {
        gates.push(Gate::Rotation { theta: euler.theta_pre });
    }
    if euler.r > MIN_SQUEEZING {
        gates.push(Gate::squeezer(euler.r)?);
    }
    if euler.theta_post != 0.0 {
        gates.push(Gate::Rotation { theta: euler.theta_post });
    }
    if d[0] != 0.0 || d[1] != 0.0 {
        gates.push(Gate::Displacement { dx: d[0], dp: d[1] });
    }
    Ok(GatePlan { gates })
}

/// Runs a plan on a single-mode input, each squeezer consuming an ancilla
/// squeezed by `ancilla_db` (infinite for the ideal limit). Rotations and
/// displacements are exact.
pub fn simulate_plan(plan: &GatePlan, input: &GaussianState, ancilla_db: f64) -> SqzResult<GaussianState> {
    plan.validate()?;
    input.require_single_mode()?;
    if !(ancilla_db >= 0.0) {
        return Err(SqzError::InvalidParameter {
            name: "ancilla_db",
            value: ancilla_db,
            reason: "ancilla squeezing must be non-negative",
        });
    }
    let r_a = if ancilla_db.is_infinite() {
        f64::INFINITY
    } else {
        db_to_nepers(ancilla_db)
    };
    let mut state = input.clone();
    for g in &plan.gates {
        state = match *g {
            Gate::Squeezer {
                transmittance, gain, ..
            } => {
                let config = ProtocolConfig {
                    transmittance,
                    ancilla_squeezing: r_a,
                    gain: Some(gain),
                    squeeze_angle: 0.0,
                };
                if r_a.is_infinite() {
                    ideal_output_map(&config, &state)?
                } else {
                    run_deterministic(&config, &ImperfectionModel::none(), &state)?.output
                }
            }
            _ => state.apply(&g.transform())?,
        };
    }
    Ok(state)
}

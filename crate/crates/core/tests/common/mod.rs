#![allow(dead_code)]

use proptest::prelude::*;
use sqzlab::gaussian::SymplecticTransform;
use sqzlab::GaussianState;

/// Parameters of a random single-mode Gaussian: thermal occupation,
/// squeezing, squeezing angle and displacement.
#[derive(Clone, Copy, Debug)]
pub struct ModeParams {
    pub n_bar: f64,
    pub r: f64,
    pub angle: f64,
    pub dx: f64,
    pub dp: f64,
}

impl ModeParams {
    pub fn state(&self) -> GaussianState {
        GaussianState::thermal(self.n_bar)
            .unwrap()
            .apply(&SymplecticTransform::squeeze_at(self.r, self.angle))
            .unwrap()
            .apply(&SymplecticTransform::displacement(self.dx, self.dp))
            .unwrap()
    }
}

pub fn mode_params() -> impl Strategy<Value = ModeParams> {
    (0.0..1.5f64, 0.0..1.2f64, -3.2..3.2f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(n_bar, r, angle, dx, dp)| {
        ModeParams {
            n_bar,
            r,
            angle,
            dx,
            dp,
        }
    })
}

pub fn pure_mode_params() -> impl Strategy<Value = ModeParams> {
    mode_params().prop_map(|p| ModeParams { n_bar: 0.0, ..p })
}

pub fn single_mode() -> impl Strategy<Value = GaussianState> {
    mode_params().prop_map(|p| p.state())
}

/// Two independent random modes entangled on a beam splitter.
pub fn two_mode() -> impl Strategy<Value = GaussianState> {
    (mode_params(), mode_params(), 0.05..0.95f64, -3.2..3.2f64).prop_map(|(a, b, t, phi)| {
        let joint = a.state().tensor(&b.state());
        let rot = SymplecticTransform::phase_rotation(phi).on_mode(2, 1).unwrap();
        joint
            .apply(&rot)
            .unwrap()
            .apply(&SymplecticTransform::beam_splitter(2, t, 0, 1).unwrap())
            .unwrap()
    })
}

pub fn max_abs(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn max_abs_vec(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).amax()
}

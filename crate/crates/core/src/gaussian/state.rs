use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use super::symplectic::{symplectic_form, SymplecticTransform};
use crate::error::{check_unit_interval, SqzError, SqzResult};
use crate::units::SHOT_NOISE_VARIANCE;

/// Relative tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Slack allowed on the uncertainty relation.
pub const UNCERTAINTY_TOL: f64 = 1e-9;

/// An N-mode Gaussian state described by its first two moments.
///
/// Quadratures are ordered `(x1, p1, x2, p2, ...)` and normalized so the
/// vacuum has covariance `I/4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateWire", into = "StateWire")]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// JSON layout: `{"n_modes": N, "mean": [...], "cov": [[row], ...]}`.
#[derive(Serialize, Deserialize)]
struct StateWire {
    n_modes: usize,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<GaussianState> for StateWire {
    fn from(s: GaussianState) -> Self {
        let dim = s.mean.len();
        StateWire {
            n_modes: s.n_modes(),
            mean: s.mean.iter().copied().collect(),
            cov: (0..dim)
                .map(|i| (0..dim).map(|j| s.cov[(i, j)]).collect())
                .collect(),
        }
    }
}

impl TryFrom<StateWire> for GaussianState {
    type Error = SqzError;

    fn try_from(w: StateWire) -> SqzResult<Self> {
        let dim = 2 * w.n_modes;
        if w.mean.len() != dim {
            return Err(SqzError::DimensionMismatch {
                expected: dim,
                found: w.mean.len(),
            });
        }
        if w.cov.len() != dim {
            return Err(SqzError::DimensionMismatch {
                expected: dim,
                found: w.cov.len(),
            });
        }
        if let Some(row) = w.cov.iter().find(|row| row.len() != dim) {
            return Err(SqzError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        let cov = DMatrix::from_fn(dim, dim, |i, j| w.cov[i][j]);
        GaussianState::new(DVector::from_vec(w.mean), cov)
    }
}

impl GaussianState {
    /// Builds a state from moments, checking symmetry and the uncertainty
    /// relation.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> SqzResult<Self> {
        let state = Self::from_moments(mean, cov)?;
        state.validate()?;
        Ok(state)
    }

    /// Builds a state from moments, checking only shapes.
    pub(crate) fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> SqzResult<Self> {
        let dim = mean.len();
        if !dim.is_multiple_of(2) {
            return Err(SqzError::InvalidState(format!(
                "mean vector has odd length {dim}"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(SqzError::DimensionMismatch {
                expected: dim,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(n_modes: usize) -> SqzResult<Self> {
        if n_modes == 0 {
            return Err(SqzError::InvalidParameter {
                name: "n_modes",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let dim = 2 * n_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * SHOT_NOISE_VARIANCE,
        })
    }

    pub fn coherent(mean_x: f64, mean_p: f64) -> Self {
        Self {
            mean: DVector::from_vec(vec![mean_x, mean_p]),
            cov: DMatrix::identity(2, 2) * SHOT_NOISE_VARIANCE,
        }
    }

    /// Squeezed vacuum whose quadrature at `angle` has variance `e^{-2r}/4`.
    pub fn squeezed_vacuum(r: f64, angle: f64) -> Self {
        let diag = Matrix2::new(
            SHOT_NOISE_VARIANCE * (-2.0 * r).exp(),
            0.0,
            0.0,
            SHOT_NOISE_VARIANCE * (2.0 * r).exp(),
        );
        let rot = rotation2(angle);
        let cov = rot * diag * rot.transpose();
        Self::single_mode(Vector2::zeros(), cov)
    }

    /// Thermal state with mean photon number `n_bar`.
    pub fn thermal(n_bar: f64) -> SqzResult<Self> {
        if !(n_bar >= 0.0) {
            return Err(SqzError::InvalidParameter {
                name: "n_bar",
                value: n_bar,
                reason: "must be non-negative",
            });
        }
        let v = SHOT_NOISE_VARIANCE * (2.0 * n_bar + 1.0);
        Ok(Self::single_mode(Vector2::zeros(), Matrix2::new(v, 0.0, 0.0, v)))
    }

    pub(crate) fn single_mode(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        Self {
            mean: DVector::from_column_slice(mean.as_slice()),
            cov: DMatrix::from_fn(2, 2, |i, j| cov[(i, j)]),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn check_mode(&self, mode: usize) -> SqzResult<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(SqzError::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            })
        }
    }

    pub(crate) fn require_single_mode(&self) -> SqzResult<()> {
        if self.n_modes() == 1 {
            Ok(())
        } else {
            Err(SqzError::DimensionMismatch {
                expected: 2,
                found: self.mean.len(),
            })
        }
    }

    pub fn mode_mean(&self, mode: usize) -> Vector2<f64> {
        Vector2::new(self.mean[2 * mode], self.mean[2 * mode + 1])
    }

    pub fn mode_cov(&self, mode: usize) -> Matrix2<f64> {
        let k = 2 * mode;
        Matrix2::new(
            self.cov[(k, k)],
            self.cov[(k, k + 1)],
            self.cov[(k + 1, k)],
            self.cov[(k + 1, k + 1)],
        )
    }

    /// Mean of the quadrature `x cos(angle) + p sin(angle)` on `mode`.
    pub fn quadrature_mean(&self, mode: usize, angle: f64) -> SqzResult<f64> {
        self.check_mode(mode)?;
        Ok(direction(angle).dot(&self.mode_mean(mode)))
    }

    pub fn marginal_variance(&self, mode: usize, angle: f64) -> SqzResult<f64> {
        self.check_mode(mode)?;
        let u = direction(angle);
        Ok((u.transpose() * self.mode_cov(mode) * u)[(0, 0)])
    }

    /// `det(4 cov)`, equal to 1 for pure states.
    pub fn purity_determinant(&self) -> f64 {
        (&self.cov * 4.0).determinant()
    }

    pub fn purity(&self) -> f64 {
        1.0 / self.purity_determinant().sqrt()
    }

    /// Symplectic eigenvalues, sorted ascending. Each is at least 1/4 for a
    /// physical state.
    pub fn symplectic_eigenvalues(&self) -> SqzResult<Vec<f64>> {
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(SqzError::SingularCovariance);
        }
        let sqrt_cov = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let k = &sqrt_cov * symplectic_form(self.n_modes()) * &sqrt_cov;
        let ktk = k.transpose() * &k;
        let mut nu: Vec<f64> = SymmetricEigen::new(ktk)
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        nu.sort_by(f64::total_cmp);
        // eigenvalues come in degenerate pairs
        Ok(nu.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
    }

    /// Smallest eigenvalue of `cov + (i/4) Omega`, via its real embedding.
    pub fn uncertainty_margin(&self) -> f64 {
        let dim = self.mean.len();
        if dim == 0 {
            return 0.0;
        }
        let b = symplectic_form(self.n_modes()) * SHOT_NOISE_VARIANCE;
        let mut embed = DMatrix::zeros(2 * dim, 2 * dim);
        embed.view_mut((0, 0), (dim, dim)).copy_from(&self.cov);
        embed.view_mut((dim, dim), (dim, dim)).copy_from(&self.cov);
        embed.view_mut((0, dim), (dim, dim)).copy_from(&(-&b));
        embed.view_mut((dim, 0), (dim, dim)).copy_from(&b);
        SymmetricEigen::new(embed)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks finiteness, symmetry and the uncertainty relation.
    pub fn validate(&self) -> SqzResult<()> {
        if self.mean.iter().chain(self.cov.iter()).any(|v| !v.is_finite()) {
            return Err(SqzError::InvalidState("non-finite moment".into()));
        }
        let scale = self.cov.amax().max(f64::MIN_POSITIVE);
        let asym = (&self.cov - self.cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(SqzError::InvalidState(format!(
                "covariance asymmetry {asym:e}"
            )));
        }
        let margin = self.uncertainty_margin();
        if margin < -UNCERTAINTY_TOL {
            return Err(SqzError::InvalidState(format!(
                "uncertainty relation violated by {:e}",
                -margin
            )));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (d1, d2) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(d1 + d2);
        mean.rows_mut(0, d1).copy_from(&self.mean);
        mean.rows_mut(d1, d2).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(d1 + d2, d1 + d2);
        cov.view_mut((0, 0), (d1, d1)).copy_from(&self.cov);
        cov.view_mut((d1, d1), (d2, d2)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// Applies `mean -> S mean + d`, `cov -> S cov S^T`, then re-symmetrizes.
    pub fn apply(&self, transform: &SymplecticTransform) -> SqzResult<GaussianState> {
        if transform.dim() != self.mean.len() {
            return Err(SqzError::DimensionMismatch {
                expected: self.mean.len(),
                found: transform.dim(),
            });
        }
        let s = transform.matrix();
        let mean = s * &self.mean + transform.displacement_vector();
        let cov = s * &self.cov * s.transpose();
        Ok(GaussianState {
            mean,
            cov: symmetrize(cov),
        })
    }

    /// Pure-loss channel of efficiency `eta` on one mode.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> SqzResult<GaussianState> {
        check_unit_interval("eta", eta)?;
        self.check_mode(mode)?;
        let mut scale = DVector::from_element(self.mean.len(), 1.0);
        scale[2 * mode] = eta.sqrt();
        scale[2 * mode + 1] = eta.sqrt();
        let mean = self.mean.component_mul(&scale);
        let mut cov = DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |i, j| {
            self.cov[(i, j)] * scale[i] * scale[j]
        });
        let k = 2 * mode;
        cov[(k, k)] += (1.0 - eta) * SHOT_NOISE_VARIANCE;
        cov[(k + 1, k + 1)] += (1.0 - eta) * SHOT_NOISE_VARIANCE;
        Ok(GaussianState { mean, cov })
    }

    /// Classical additive Gaussian noise with covariance `noise` on one mode.
    pub fn add_noise(&self, mode: usize, noise: &Matrix2<f64>) -> SqzResult<GaussianState> {
        self.check_mode(mode)?;
        let eig = noise.symmetric_eigenvalues();
        if eig.iter().any(|&l| l < -UNCERTAINTY_TOL) {
            return Err(SqzError::InvalidParameter {
                name: "noise",
                value: eig.min(),
                reason: "noise covariance must be positive semidefinite",
            });
        }
        let mut out = self.clone();
        let k = 2 * mode;
        for i in 0..2 {
            for j in 0..2 {
                out.cov[(k + i, k + j)] += noise[(i, j)];
            }
        }
        Ok(out)
    }

    /// Moments of the modes listed in `keep`, in the given order.
    pub fn partial_trace(&self, keep: &[usize]) -> SqzResult<GaussianState> {
        for (i, &m) in keep.iter().enumerate() {
            self.check_mode(m)?;
            if keep[..i].contains(&m) {
                return Err(SqzError::Unsupported(format!(
                    "mode {m} listed twice in partial trace"
                )));
            }
        }
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        Ok(GaussianState { mean, cov })
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Unit vector of the quadrature `x cos(angle) + p sin(angle)`.
pub fn direction(angle: f64) -> Vector2<f64> {
    Vector2::new(angle.cos(), angle.sin())
}

/// Phase-space rotation by `theta`: `(x, p) -> (x cos - p sin, x sin + p cos)`.
pub fn rotation2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.mean().as_slice(), &[0.0, 0.0]);
        assert_eq!(v.mode_cov(0), Matrix2::new(0.25, 0.0, 0.0, 0.25));
        let v2 = GaussianState::vacuum(2).unwrap();
        assert_eq!(v2.cov(), &(DMatrix::identity(4, 4) * 0.25));
        for k in 0..16 {
            let phi = k as f64 * PI / 8.0;
            assert!((v.marginal_variance(0, phi).unwrap() - 0.25).abs() < 1e-15);
        }
        assert!(GaussianState::vacuum(0).is_err());
    }

    #[test]
    fn coherent_keeps_vacuum_cov() {
        assert_eq!(GaussianState::coherent(0.0, 0.0), GaussianState::vacuum(1).unwrap());
        let c = GaussianState::coherent(1.0, 1.0);
        assert_eq!(c.mode_mean(0), Vector2::new(1.0, 1.0));
        assert_eq!(c.mode_cov(0), Matrix2::new(0.25, 0.0, 0.0, 0.25));
    }

    #[test]
    fn squeezed_vacuum_variances() {
        assert_eq!(GaussianState::squeezed_vacuum(0.0, 0.0), GaussianState::vacuum(1).unwrap());
        let r = 5.1 * std::f64::consts::LN_10 / 20.0;
        let s = GaussianState::squeezed_vacuum(r, 0.0);
        // oracle: 0.25 * 10^{-0.51}, 0.25 * 10^{0.51}
        assert!((s.marginal_variance(0, 0.0).unwrap() - 0.25 * 10f64.powf(-0.51)).abs() < 1e-15);
        assert!((s.marginal_variance(0, PI / 2.0).unwrap() - 0.25 * 10f64.powf(0.51)).abs() < 1e-14);
        assert!((s.marginal_variance(0, 0.0).unwrap() - 0.077_26).abs() < 1e-5);
        assert!((s.marginal_variance(0, PI / 2.0).unwrap() - 0.808_96).abs() < 5e-5);
        for &(r, a) in &[(0.3, 0.0), (1.2, 0.7), (2.0, -1.1)] {
            let s = GaussianState::squeezed_vacuum(r, a);
            assert!((s.mode_cov(0).determinant() - 1.0 / 16.0).abs() < 1e-14);
            assert!((s.marginal_variance(0, a).unwrap() - 0.25 * (-2.0 * r).exp()).abs() < 1e-14);
            s.validate().unwrap();
        }
    }

    #[test]
    fn rejects_unphysical() {
        let bad = GaussianState::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]),
        );
        assert!(matches!(bad, Err(SqzError::InvalidState(_))));
        let asym = GaussianState::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.01, 0.0, 0.3]),
        );
        assert!(matches!(asym, Err(SqzError::InvalidState(_))));
    }

    #[test]
    fn symplectic_eigenvalues_of_thermal() {
        let t = GaussianState::thermal(1.5).unwrap();
        let nu = t.symplectic_eigenvalues().unwrap();
        assert_eq!(nu.len(), 1);
        assert!((nu[0] - 0.25 * 4.0).abs() < 1e-12);
        let s = GaussianState::squeezed_vacuum(0.8, 0.3);
        assert!((s.symplectic_eigenvalues().unwrap()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn loss_formula() {
        let s = GaussianState::squeezed_vacuum(5.1 * std::f64::consts::LN_10 / 20.0, 0.0);
        let l = s.apply_loss(0, 0.96).unwrap();
        let expected = 0.96 * s.mode_cov(0)[(0, 0)] + 0.04 * 0.25;
        assert!((l.mode_cov(0)[(0, 0)] - expected).abs() < 1e-15);
        assert!((l.mode_cov(0)[(0, 0)] - 0.084_17).abs() < 1e-5);
        assert_eq!(s.apply_loss(0, 1.0).unwrap(), s);
        let c = GaussianState::coherent(3.0, -1.0).tensor(&s);
        let gone = c.apply_loss(0, 0.0).unwrap();
        assert_eq!(gone.partial_trace(&[0]).unwrap(), GaussianState::vacuum(1).unwrap());
        assert!(c.apply_loss(0, 1.2).is_err());
        assert!(c.apply_loss(2, 0.5).is_err());
    }

    #[test]
    fn loss_increases_determinant() {
        let s = GaussianState::squeezed_vacuum(0.7, 0.2);
        let before = s.purity_determinant();
        for eta in [0.1, 0.5, 0.9, 0.99] {
            assert!(s.apply_loss(0, eta).unwrap().purity_determinant() > before);
        }
        let v = GaussianState::vacuum(1).unwrap();
        assert!((v.apply_loss(0, 0.3).unwrap().purity_determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = GaussianState::coherent(1.0, 2.0);
        let b = GaussianState::squeezed_vacuum(0.4, 1.0);
        let ab = a.tensor(&b);
        assert_eq!(ab.partial_trace(&[0]).unwrap(), a);
        assert_eq!(ab.partial_trace(&[1]).unwrap(), b);
        assert_eq!(ab.partial_trace(&[1, 0]).unwrap(), b.tensor(&a));
        assert!(ab.partial_trace(&[0, 0]).is_err());
        assert!(ab.partial_trace(&[3]).is_err());
    }

    #[test]
    fn json_round_trip_and_layout() {
        let s = GaussianState::coherent(1.0, -2.0).tensor(&GaussianState::squeezed_vacuum(0.3, 0.4));
        let text = serde_json::to_string(&s).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_modes"], 2);
        assert_eq!(v["cov"].as_array().unwrap().len(), 4);
        assert_eq!(v["mean"][1], -2.0);
        let back: GaussianState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"n_modes":1,"mean":[0,0],"cov":[[0.01,0],[0,0.01]]}"#;
        assert!(serde_json::from_str::<GaussianState>(bad).is_err());
        let short = r#"{"n_modes":1,"mean":[0],"cov":[[0.25,0],[0,0.25]]}"#;
        assert!(serde_json::from_str::<GaussianState>(short).is_err());
    }
}

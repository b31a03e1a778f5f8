use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::state::rotation2;
use crate::error::{check_unit_interval, SqzError, SqzResult};

/// Elementwise tolerance on `S Omega S^T = Omega`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// Standard symplectic form for `n_modes` modes in `(x1, p1, x2, p2, ...)`
/// ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// An affine phase-space map `r -> S r + d` with `S` symplectic.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticTransform {
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> SqzResult<Self> {
        let dim = displacement.len();
        if !dim.is_multiple_of(2) || matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(SqzError::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        let t = Self {
            matrix,
            displacement,
        };
        let deviation = t.symplectic_deviation();
        if deviation > SYMPLECTIC_TOL {
            return Err(SqzError::NonSymplectic { deviation });
        }
        Ok(t)
    }

    fn single_mode(m: Matrix2<f64>, d: Vector2<f64>) -> Self {
        Self {
            matrix: DMatrix::from_fn(2, 2, |i, j| m[(i, j)]),
            displacement: DVector::from_column_slice(d.as_slice()),
        }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: DVector::zeros(2 * n_modes),
        }
    }

    /// Two-mode beam splitter of transmittance `t`:
    ///
    /// ```text
    /// a' = sqrt(T) a + sqrt(1-T) b
    /// b' = sqrt(T) b - sqrt(1-T) a
    /// ```
    ///
    /// applied identically to both quadratures. `mode_a` plays the role of
    /// the signal, `mode_b` of the ancilla.
    pub fn beam_splitter(n_modes: usize, t: f64, mode_a: usize, mode_b: usize) -> SqzResult<Self> {
        check_unit_interval("transmittance", t)?;
        for m in [mode_a, mode_b] {
            if m >= n_modes {
                return Err(SqzError::ModeOutOfRange { mode: m, n_modes });
            }
        }
        if mode_a == mode_b {
            return Err(SqzError::Unsupported(
                "beam splitter needs two distinct modes".into(),
            ));
        }
        let (tr, rf) = (t.sqrt(), (1.0 - t).sqrt());
        let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
        for q in 0..2 {
            let (a, b) = (2 * mode_a + q, 2 * mode_b + q);
            s[(a, a)] = tr;
            s[(a, b)] = rf;
            s[(b, b)] = tr;
            s[(b, a)] = -rf;
        }
        Ok(Self {
            matrix: s,
            displacement: DVector::zeros(2 * n_modes),
        })
    }

    pub fn phase_rotation(theta: f64) -> Self {
        Self::single_mode(rotation2(theta), Vector2::zeros())
    }

    /// `(x, p) -> (e^{-r} x, e^{r} p)`.
    pub fn squeeze(r: f64) -> Self {
        Self::single_mode(Matrix2::new((-r).exp(), 0.0, 0.0, r.exp()), Vector2::zeros())
    }

    /// Squeezes the quadrature at `angle` by `e^{-r}`.
    pub fn squeeze_at(r: f64, angle: f64) -> Self {
        let rot = rotation2(angle);
        let s = Matrix2::new((-r).exp(), 0.0, 0.0, r.exp());
        Self::single_mode(rot * s * rot.transpose(), Vector2::zeros())
    }

    pub fn displacement(dx: f64, dp: f64) -> Self {
        Self::single_mode(Matrix2::identity(), Vector2::new(dx, dp))
    }

    /// Single-mode map from a 2x2 matrix and displacement.
    pub fn from_single_mode(matrix: Matrix2<f64>, displacement: Vector2<f64>) -> SqzResult<Self> {
        let t = Self::single_mode(matrix, displacement);
        let deviation = t.symplectic_deviation();
        if deviation > SYMPLECTIC_TOL {
            return Err(SqzError::NonSymplectic { deviation });
        }
        Ok(t)
    }

    /// Embeds a single-mode transform into an `n_modes` system acting on `mode`.
    pub fn on_mode(&self, n_modes: usize, mode: usize) -> SqzResult<Self> {
        if self.dim() != 2 {
            return Err(SqzError::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            });
        }
        if mode >= n_modes {
            return Err(SqzError::ModeOutOfRange { mode, n_modes });
        }
        let mut out = Self::identity(n_modes);
        let k = 2 * mode;
        out.matrix.view_mut((k, k), (2, 2)).copy_from(&self.matrix);
        out.displacement.rows_mut(k, 2).copy_from(&self.displacement);
        Ok(out)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &SymplecticTransform) -> SqzResult<Self> {
        if self.dim() != next.dim() {
            return Err(SqzError::DimensionMismatch {
                expected: self.dim(),
                found: next.dim(),
            });
        }
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
            displacement: &next.matrix * &self.displacement + &next.displacement,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement_vector(&self) -> &DVector<f64> {
        &self.displacement
    }

    pub fn dim(&self) -> usize {
        self.displacement.len()
    }

    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    /// Largest elementwise entry of `S Omega S^T - Omega`.
    pub fn symplectic_deviation(&self) -> f64 {
        let omega = symplectic_form(self.n_modes());
        (&self.matrix * &omega * self.matrix.transpose() - omega).amax()
    }
}

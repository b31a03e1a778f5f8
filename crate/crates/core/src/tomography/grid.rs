use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{SqzError, SqzResult};
use crate::format::fmt_f64;
use crate::gaussian::GaussianState;

/// Rectangular phase-space window sampled on an `n_x` by `n_p` lattice.
/// Nodes include both edges: `x_i = x_min + i (x_max - x_min) / (n_x - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, n_x: usize, n_p: usize) -> SqzResult<Self> {
        let g = Self {
            x_min,
            x_max,
            p_min,
            p_max,
            n_x,
            n_p,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square window of half-width `half_width` around the origin.
    pub fn square(half_width: f64, n: usize) -> SqzResult<Self> {
        Self::new(-half_width, half_width, -half_width, half_width, n, n)
    }

    /// Window centred on the state's mean reaching `n_sigma` marginal
    /// standard deviations along `x` and `p`.
    pub fn covering(state: &GaussianState, n_sigma: f64, n: usize) -> SqzResult<Self> {
        state.require_single_mode()?;
        let m = state.mode_mean(0);
        let c = state.mode_cov(0);
        let (hx, hp) = (n_sigma * c[(0, 0)].sqrt(), n_sigma * c[(1, 1)].sqrt());
        Self::new(m[0] - hx, m[0] + hx, m[1] - hp, m[1] + hp, n, n)
    }

    pub fn validate(&self) -> SqzResult<()> {
        for (name, v) in [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("p_min", self.p_min),
            ("p_max", self.p_max),
        ] {
            if !v.is_finite() {
                return Err(SqzError::InvalidParameter {
                    name,
                    value: v,
                    reason: "grid bounds must be finite",
                });
            }
        }
        if !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(SqzError::InvalidParameter {
                name: "x_max",
                value: self.x_max,
                reason: "grid window must have positive extent",
            });
        }
        if self.n_x < 2 || self.n_p < 2 {
            return Err(SqzError::InvalidParameter {
                name: "n_x",
                value: self.n_x.min(self.n_p) as f64,
                reason: "grid needs at least two nodes per axis",
            });
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }
}

/// A Wigner function sampled on a [`GridSpec`]. `values[i * n_p + j]` holds
/// `W(x_i, p_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

/// Moments of a gridded quasi-distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridMoments {
    pub norm: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl WignerGrid {
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> SqzResult<Self> {
        spec.validate()?;
        let mut values = Vec::with_capacity(spec.n_x * spec.n_p);
        for i in 0..spec.n_x {
            let x = spec.x(i);
            for j in 0..spec.n_p {
                values.push(f(x, spec.p(j)));
            }
        }
        Ok(Self { spec, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_p + j]
    }

    /// Sum of all values times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute pointwise difference to another grid on the same
    /// lattice.
    pub fn max_abs_diff(&self, other: &WignerGrid) -> SqzResult<f64> {
        self.check_same_lattice(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Mean squared pointwise difference to another grid on the same lattice.
    pub fn mean_squared_diff(&self, other: &WignerGrid) -> SqzResult<f64> {
        self.check_same_lattice(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / self.values.len() as f64)
    }

    fn check_same_lattice(&self, other: &WignerGrid) -> SqzResult<()> {
        if self.spec != other.spec {
            return Err(SqzError::Unsupported("grids are defined on different lattices".into()));
        }
        Ok(())
    }

    /// First and second moments of the grid, normalized by its own integral.
    pub fn moments(&self) -> GridMoments {
        let s = &self.spec;
        let (mut w, mut sx, mut sp) = (0.0, 0.0, 0.0);
        for i in 0..s.n_x {
            for j in 0..s.n_p {
                let v = self.get(i, j);
                w += v;
                sx += v * s.x(i);
                sp += v * s.p(j);
            }
        }
        let (mx, mp) = (sx / w, sp / w);
        let (mut vxx, mut vpp, mut vxp) = (0.0, 0.0, 0.0);
        for i in 0..s.n_x {
            let dx = s.x(i) - mx;
            for j in 0..s.n_p {
                let v = self.get(i, j);
                let dp = s.p(j) - mp;
                vxx += v * dx * dx;
                vpp += v * dp * dp;
                vxp += v * dx * dp;
            }
        }
        GridMoments {
            norm: w * s.cell_area(),
            mean_x: mx,
            mean_p: mp,
            var_x: vxx / w,
            var_p: vpp / w,
            cov_xp: vxp / w,
        }
    }

    /// Writes the values as a CSV matrix, one line per `x` node and one
    /// column per `p` node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> SqzResult<()> {
        let mut line = String::new();
        for i in 0..self.spec.n_x {
            line.clear();
            for j in 0..self.spec.n_p {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(self.get(i, j)));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Reads a CSV matrix written by [`WignerGrid::write_csv`].
    pub fn read_csv<R: BufRead>(spec: GridSpec, input: R) -> SqzResult<Self> {
        spec.validate()?;
        let mut values = Vec::with_capacity(spec.n_x * spec.n_p);
        let mut rows = 0;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    SqzError::InvalidRecord(format!("line {}: `{}` is not a number", lineno + 1, field))
                })?;
                values.push(v);
            }
            if values.len() - before != spec.n_p {
                return Err(SqzError::InvalidRecord(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    spec.n_p,
                    values.len() - before
                )));
            }
            rows += 1;
        }
        if rows != spec.n_x {
            return Err(SqzError::InvalidRecord(format!(
                "expected {} rows, found {rows}",
                spec.n_x
            )));
        }
        Ok(Self { spec, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_nodes_include_edges() {
        let g = GridSpec::new(-1.0, 1.0, 0.0, 2.0, 5, 3).unwrap();
        assert_eq!(g.x(0), -1.0);
        assert_eq!(g.x(4), 1.0);
        assert_eq!(g.p(2), 2.0);
        assert!((g.cell_area() - 0.5).abs() < 1e-15);
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 5, 5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, f64::NAN, 5, 5).is_err());
        assert!(GridSpec::square(1.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let spec = GridSpec::square(1.0, 4).unwrap();
        let g = WignerGrid::from_fn(spec, |x, p| x * 10.0 + p / 3.0).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = WignerGrid::read_csv(spec, buf.as_slice()).unwrap();
        for (a, b) in g.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
        assert!(WignerGrid::read_csv(GridSpec::square(1.0, 5).unwrap(), buf.as_slice()).is_err());
    }
}

//! Chart-tagged scalar fields on uniform grids.
//!
//! Every 2D field carries a chart tag that fixes the meaning of its two
//! coordinates:
//!
//! * `cartesian-xy`: the (x1, x2) plane of a field invariant along x3,
//! * `meridional-rz`: the (r, z) half-plane of an axisymmetric field,
//! * `theta-z`: the (theta, z) plane of a field invariant along r.
//!
//! Arrays are indexed `values[[i, j]]` with `i` along the first chart
//! coordinate and `j` along the second. 3D boxes use `ScalarGrid3` with the
//! same convention extended to `[[i, j, k]]` over (x1, x2, x3).

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate chart for 2D grid data.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartTag {
    CartesianXy,
    MeridionalRz,
    ThetaZ,
    Full3d,
}

impl ChartTag {
    pub fn coord_names(self) -> [&'static str; 2] {
        match self {
            ChartTag::CartesianXy => ["x1", "x2"],
            ChartTag::MeridionalRz => ["r", "z"],
            ChartTag::ThetaZ => ["theta", "z"],
            ChartTag::Full3d => ["", ""],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChartTag::CartesianXy => "cartesian-xy",
            ChartTag::MeridionalRz => "meridional-rz",
            ChartTag::ThetaZ => "theta-z",
            ChartTag::Full3d => "full-3d",
        }
    }
}

/// Scalar samples on a uniform 2D grid with a chart tag.
#[derive(Clone, Debug)]
pub struct ScalarChartField {
    pub chart: ChartTag,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub values: Array2<f64>,
    pub name: String,
}

impl ScalarChartField {
    pub fn new(
        chart: ChartTag,
        origin: [f64; 2],
        spacing: [f64; 2],
        values: Array2<f64>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got ({}, {})",
                spacing[0], spacing[1]
            )));
        }
        let (n1, n2) = values.dim();
        if n1 < 2 || n2 < 2 {
            return Err(Error::GridTooSmall(format!("{}x{}", n1, n2)));
        }
        Ok(Self {
            chart,
            origin,
            spacing,
            values,
            name: name.into(),
        })
    }

    /// Sample a function on a uniform grid covering `[lo, hi]` with
    /// `shape` nodes per axis (endpoints included).
    pub fn sample(
        chart: ChartTag,
        lo: [f64; 2],
        hi: [f64; 2],
        shape: [usize; 2],
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if shape[0] < 2 || shape[1] < 2 {
            return Err(Error::GridTooSmall(format!("{}x{}", shape[0], shape[1])));
        }
        let spacing = [
            (hi[0] - lo[0]) / (shape[0] - 1) as f64,
            (hi[1] - lo[1]) / (shape[1] - 1) as f64,
        ];
        let values = Array2::from_shape_fn((shape[0], shape[1]), |(i, j)| {
            f(lo[0] + i as f64 * spacing[0], lo[1] + j as f64 * spacing[1])
        });
        Self::new(chart, lo, spacing, values, name)
    }

    pub fn shape(&self) -> [usize; 2] {
        let (n1, n2) = self.values.dim();
        [n1, n2]
    }

    /// Physical coordinates of node (i, j).
    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
        ]
    }

    pub fn axis_max(&self) -> [f64; 2] {
        let [n1, n2] = self.shape();
        [
            self.origin[0] + (n1 - 1) as f64 * self.spacing[0],
            self.origin[1] + (n2 - 1) as f64 * self.spacing[1],
        ]
    }

    /// Bilinear interpolation at a physical point. Points must lie inside
    /// the grid (a small tolerance on the outer edge is accepted).
    pub fn bilinear(&self, x: [f64; 2]) -> Result<f64> {
        let [n1, n2] = self.shape();
        let s = self.spacing;
        let mut u = (x[0] - self.origin[0]) / s[0];
        let mut v = (x[1] - self.origin[1]) / s[1];
        let eps = 1e-9;
        if u < -eps || v < -eps || u > (n1 - 1) as f64 + eps || v > (n2 - 1) as f64 + eps {
            return Err(Error::OutsideGrid(x[0], x[1]));
        }
        u = u.clamp(0.0, (n1 - 1) as f64);
        v = v.clamp(0.0, (n2 - 1) as f64);
        let i = (u.floor() as usize).min(n1 - 2);
        let j = (v.floor() as usize).min(n2 - 2);
        let a = u - i as f64;
        let b = v - j as f64;
        let w = &self.values;
        Ok(w[[i, j]] * (1.0 - a) * (1.0 - b)
            + w[[i + 1, j]] * a * (1.0 - b)
            + w[[i, j + 1]] * (1.0 - a) * b
            + w[[i + 1, j + 1]] * a * b)
    }

    pub fn same_grid(&self, other: &ScalarChartField) -> bool {
        self.chart == other.chart
            && self.shape() == other.shape()
            && self.origin == other.origin
            && self.spacing == other.spacing
    }

    pub fn check_same_grid(&self, other: &ScalarChartField, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids(what.to_string()))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("field '{}'", self.name)))
        }
    }
}

/// Uniform 3D box specification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec3 {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub shape: [usize; 3],
}

impl GridSpec3 {
    /// Cube `[lo, hi]^3` with `n` nodes per axis, endpoints included.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::rect([lo; 3], [hi; 3], [n; 3])
    }

    pub fn rect(lo: [f64; 3], hi: [f64; 3], shape: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if shape[a] < 2 {
                return Err(Error::GridTooSmall(format!("axis {}: {}", a, shape[a])));
            }
            if hi[a] <= lo[a] {
                return Err(Error::InvalidParameter(format!(
                    "degenerate extent on axis {}: [{}, {}]",
                    a, lo[a], hi[a]
                )));
            }
        }
        let spacing = [
            (hi[0] - lo[0]) / (shape[0] - 1) as f64,
            (hi[1] - lo[1]) / (shape[1] - 1) as f64,
            (hi[2] - lo[2]) / (shape[2] - 1) as f64,
        ];
        Ok(Self {
            origin: lo,
            spacing,
            shape,
        })
    }

    /// Validate explicit geometry (for deserialized specs).
    pub fn from_parts(origin: [f64; 3], spacing: [f64; 3], shape: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if shape[a] < 2 {
                return Err(Error::GridTooSmall(format!("axis {}: {}", a, shape[a])));
            }
            if !(spacing[a] > 0.0 && spacing[a].is_finite() && origin[a].is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bad geometry on axis {}: origin {}, spacing {}",
                    a, origin[a], spacing[a]
                )));
            }
        }
        Ok(Self {
            origin,
            spacing,
            shape,
        })
    }

    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }
}

/// Scalar samples on a uniform 3D box.
#[derive(Clone, Debug)]
pub struct ScalarGrid3 {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub values: Array3<f64>,
    pub name: String,
}

impl ScalarGrid3 {
    pub fn sample(spec: &GridSpec3, name: impl Into<String>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = Array3::from_shape_fn(
            (spec.shape[0], spec.shape[1], spec.shape[2]),
            |(i, j, k)| {
                let p = spec.coord(i, j, k);
                f(p[0], p[1], p[2])
            },
        );
        Self {
            origin: spec.origin,
            spacing: spec.spacing,
            values,
            name: name.into(),
        }
    }

    pub fn from_parts(spec: GridSpec3, values: Array3<f64>, name: impl Into<String>) -> Self {
        Self {
            origin: spec.origin,
            spacing: spec.spacing,
            values,
            name: name.into(),
        }
    }

    pub fn spec(&self) -> GridSpec3 {
        let (n1, n2, n3) = self.values.dim();
        GridSpec3 {
            origin: self.origin,
            spacing: self.spacing,
            shape: [n1, n2, n3],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        let (n1, n2, n3) = self.values.dim();
        [n1, n2, n3]
    }

    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Trilinear interpolation at a physical point inside the box.
    pub fn trilinear(&self, x: [f64; 3]) -> Result<f64> {
        let [n1, n2, n3] = self.shape();
        let n = [n1, n2, n3];
        let mut t = [0.0f64; 3];
        for a in 0..3 {
            let u = (x[a] - self.origin[a]) / self.spacing[a];
            let eps = 1e-9;
            if u < -eps || u > (n[a] - 1) as f64 + eps {
                return Err(Error::OutsideGrid(x[0], x[1]));
            }
            t[a] = u.clamp(0.0, (n[a] - 1) as f64);
        }
        let idx = |a: usize| (t[a].floor() as usize).min(n[a] - 2);
        let (i, j, k) = (idx(0), idx(1), idx(2));
        let (a, b, c) = (t[0] - i as f64, t[1] - j as f64, t[2] - k as f64);
        let w = &self.values;
        let c00 = w[[i, j, k]] * (1.0 - a) + w[[i + 1, j, k]] * a;
        let c10 = w[[i, j + 1, k]] * (1.0 - a) + w[[i + 1, j + 1, k]] * a;
        let c01 = w[[i, j, k + 1]] * (1.0 - a) + w[[i + 1, j, k + 1]] * a;
        let c11 = w[[i, j + 1, k + 1]] * (1.0 - a) + w[[i + 1, j + 1, k + 1]] * a;
        let c0 = c00 * (1.0 - b) + c10 * b;
        let c1 = c01 * (1.0 - b) + c11 * b;
        Ok(c0 * (1.0 - c) + c1 * c)
    }

    pub fn same_grid(&self, other: &ScalarGrid3) -> bool {
        self.shape() == other.shape() && self.origin == other.origin && self.spacing == other.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_bilinear_functions_exactly() {
        let f = ScalarChartField::sample(
            ChartTag::CartesianXy,
            [0.0, 0.0],
            [2.0, 3.0],
            [9, 7],
            "g",
            |x, y| 2.0 + 0.5 * x - 1.5 * y + 0.25 * x * y,
        )
        .unwrap();
        let exact = |x: f64, y: f64| 2.0 + 0.5 * x - 1.5 * y + 0.25 * x * y;
        for &(x, y) in &[(0.31, 0.77), (1.9, 2.99), (0.0, 0.0), (2.0, 3.0)] {
            assert!((f.bilinear([x, y]).unwrap() - exact(x, y)).abs() < 1e-13);
        }
        assert!(f.bilinear([-0.2, 1.0]).is_err());
        assert!(f.bilinear([1.0, 3.2]).is_err());
    }

    #[test]
    fn trilinear_reproduces_trilinear_functions_exactly() {
        let spec = GridSpec3::cube(-1.0, 1.0, 9).unwrap();
        let g = ScalarGrid3::sample(&spec, "g", |x, y, z| 1.0 + x - 2.0 * y + x * y * z);
        for &(x, y, z) in &[(0.13, -0.7, 0.41), (-0.99, 0.99, 0.0)] {
            let exact = 1.0 + x - 2.0 * y + x * y * z;
            assert!((g.trilinear([x, y, z]).unwrap() - exact).abs() < 1e-13);
        }
        assert!(g.trilinear([1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn grid_validation_rejects_degenerate_shapes() {
        assert!(ScalarChartField::sample(
            ChartTag::CartesianXy,
            [0.0, 0.0],
            [1.0, 1.0],
            [1, 5],
            "g",
            |_, _| 0.0
        )
        .is_err());
        assert!(GridSpec3::cube(1.0, 1.0, 4).is_err());
    }
}

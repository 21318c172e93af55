//! Vector fields with a symmetry, stored as component grids.
//!
//! Three reduced representations cover the symmetric cases, plus a full 3D
//! box for fields without a continuous symmetry:
//!
//! * `Translational`: components (u1, u2, u3) on an (x1, x2) grid, field
//!   independent of x3.
//! * `Rotational`: cylindrical components (u_r, u_theta, u_z) on an (r, z)
//!   grid, field independent of theta.
//! * `ZPlanar`: a planar field v(x1, x2) rotated about x3 with angle
//!   -F(x3), where F is the antiderivative of an axial profile. Components
//!   are the unrotated (v1, v2).
//! * `Full3d`: components on a common 3D box.

use ndarray::Array2;

use crate::chart::{ChartTag, GridSpec3, ScalarChartField, ScalarGrid3};
use crate::error::{Error, Result};
use crate::profile::RadialProfile;

#[derive(Clone, Debug)]
pub enum SymmetricVectorField {
    Translational {
        u1: ScalarChartField,
        u2: ScalarChartField,
        u3: ScalarChartField,
    },
    Rotational {
        u_r: ScalarChartField,
        u_theta: ScalarChartField,
        u_z: ScalarChartField,
    },
    ZPlanar {
        v1: ScalarChartField,
        v2: ScalarChartField,
        /// Axial proportionality factor f(x3); the rotation angle is its
        /// antiderivative.
        factor: RadialProfile,
    },
    Full3d {
        u1: ScalarGrid3,
        u2: ScalarGrid3,
        u3: ScalarGrid3,
    },
}

impl SymmetricVectorField {
    pub fn translational(u1: ScalarChartField, u2: ScalarChartField, u3: ScalarChartField) -> Result<Self> {
        for f in [&u1, &u2, &u3] {
            if f.chart != ChartTag::CartesianXy {
                return Err(Error::ChartMismatch(format!(
                    "translational component '{}' tagged {}",
                    f.name,
                    f.chart.as_str()
                )));
            }
        }
        u1.check_same_grid(&u2, "translational components")?;
        u1.check_same_grid(&u3, "translational components")?;
        Ok(Self::Translational { u1, u2, u3 })
    }

    pub fn rotational(u_r: ScalarChartField, u_theta: ScalarChartField, u_z: ScalarChartField) -> Result<Self> {
        for f in [&u_r, &u_theta, &u_z] {
            if f.chart != ChartTag::MeridionalRz {
                return Err(Error::ChartMismatch(format!(
                    "rotational component '{}' tagged {}",
                    f.name,
                    f.chart.as_str()
                )));
            }
        }
        u_r.check_same_grid(&u_theta, "rotational components")?;
        u_r.check_same_grid(&u_z, "rotational components")?;
        Ok(Self::Rotational { u_r, u_theta, u_z })
    }

    pub fn z_planar(v1: ScalarChartField, v2: ScalarChartField, factor: RadialProfile) -> Result<Self> {
        if v1.chart != ChartTag::CartesianXy || v2.chart != ChartTag::CartesianXy {
            return Err(Error::ChartMismatch("z-planar components must be cartesian-xy".into()));
        }
        v1.check_same_grid(&v2, "z-planar components")?;
        Ok(Self::ZPlanar { v1, v2, factor })
    }

    pub fn full3d(u1: ScalarGrid3, u2: ScalarGrid3, u3: ScalarGrid3) -> Result<Self> {
        if !u1.same_grid(&u2) || !u1.same_grid(&u3) {
            return Err(Error::IncompatibleGrids("full-3d components".into()));
        }
        Ok(Self::Full3d { u1, u2, u3 })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Translational { .. } => "translational",
            Self::Rotational { .. } => "rotational",
            Self::ZPlanar { .. } => "z-planar",
            Self::Full3d { .. } => "full-3d",
        }
    }

    pub fn components(&self) -> [&str; 3] {
        match self {
            Self::Translational { .. } => ["u1", "u2", "u3"],
            Self::Rotational { .. } => ["u_r", "u_theta", "u_z"],
            Self::ZPlanar { .. } => ["v1", "v2", "factor"],
            Self::Full3d { .. } => ["u1", "u2", "u3"],
        }
    }

    /// Cartesian components at a physical point (x1, x2, x3).
    pub fn eval_cartesian(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match self {
            Self::Translational { u1, u2, u3 } => {
                let p = [x[0], x[1]];
                Ok([u1.bilinear(p)?, u2.bilinear(p)?, u3.bilinear(p)?])
            }
            Self::Rotational { u_r, u_theta, u_z } => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let p = [r, x[2]];
                let ur = u_r.bilinear(p)?;
                let ut = u_theta.bilinear(p)?;
                let uz = u_z.bilinear(p)?;
                if r == 0.0 {
                    // On the axis the angular direction is undefined; a
                    // regular field has ur = ut = 0 there.
                    return Ok([ur, ut, uz]);
                }
                let (c, s) = (x[0] / r, x[1] / r);
                Ok([ur * c - ut * s, ur * s + ut * c, uz])
            }
            Self::ZPlanar { v1, v2, factor } => {
                let p = [x[0], x[1]];
                let a = v1.bilinear(p)?;
                let b = v2.bilinear(p)?;
                let ang = -factor.antiderivative(x[2])?;
                let (c, s) = (ang.cos(), ang.sin());
                Ok([c * a - s * b, s * a + c * b, 0.0])
            }
            Self::Full3d { u1, u2, u3 } => {
                Ok([u1.trilinear(x)?, u2.trilinear(x)?, u3.trilinear(x)?])
            }
        }
    }

    /// Resample any representation onto a 3D box.
    pub fn resample(&self, spec: &GridSpec3) -> Result<Self> {
        let mut comp = Vec::with_capacity(3);
        for c in 0..3 {
            let mut g = ScalarGrid3::sample(spec, format!("u{}", c + 1), |_, _, _| 0.0);
            let shape = spec.shape;
            for i in 0..shape[0] {
                for j in 0..shape[1] {
                    for k in 0..shape[2] {
                        let x = spec.coord(i, j, k);
                        let v = self.eval_cartesian(x)?;
                        g.values[[i, j, k]] = v[c];
                    }
                }
            }
            comp.push(g);
        }
        let u3 = comp.pop().unwrap();
        let u2 = comp.pop().unwrap();
        let u1 = comp.pop().unwrap();
        Self::full3d(u1, u2, u3)
    }

    pub fn component_fields(&self) -> Option<[&ScalarChartField; 3]> {
        match self {
            Self::Translational { u1, u2, u3 } => Some([u1, u2, u3]),
            Self::Rotational { u_r, u_theta, u_z } => Some([u_r, u_theta, u_z]),
            _ => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Translational { u1, u2, u3 } => u1.max_abs().max(u2.max_abs()).max(u3.max_abs()),
            Self::Rotational { u_r, u_theta, u_z } => {
                u_r.max_abs().max(u_theta.max_abs()).max(u_z.max_abs())
            }
            Self::ZPlanar { v1, v2, .. } => v1.max_abs().max(v2.max_abs()),
            Self::Full3d { u1, u2, u3 } => {
                let m = |g: &ScalarGrid3| g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                m(u1).max(m(u2)).max(m(u3))
            }
        }
    }
}

/// Convenience constructor: sample three closures over a 2D grid.
pub fn sample_translational(
    lo: [f64; 2],
    hi: [f64; 2],
    shape: [usize; 2],
    f: impl Fn(f64, f64) -> [f64; 3],
) -> Result<SymmetricVectorField> {
    let make = |c: usize, name: &str| -> Result<ScalarChartField> {
        ScalarChartField::sample(ChartTag::CartesianXy, lo, hi, shape, name, |x, y| f(x, y)[c])
    };
    SymmetricVectorField::translational(make(0, "u1")?, make(1, "u2")?, make(2, "u3")?)
}

pub fn sample_rotational(
    lo: [f64; 2],
    hi: [f64; 2],
    shape: [usize; 2],
    f: impl Fn(f64, f64) -> [f64; 3],
) -> Result<SymmetricVectorField> {
    if lo[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rotational grid must satisfy r >= 0, got r0 = {}",
            lo[0]
        )));
    }
    let make = |c: usize, name: &str| -> Result<ScalarChartField> {
        ScalarChartField::sample(ChartTag::MeridionalRz, lo, hi, shape, name, |r, z| f(r, z)[c])
    };
    SymmetricVectorField::rotational(make(0, "u_r")?, make(1, "u_theta")?, make(2, "u_z")?)
}

/// Sample closures for cartesian components over a 3D box.
pub fn sample_full3d(
    spec: &GridSpec3,
    f: impl Fn(f64, f64, f64) -> [f64; 3],
) -> Result<SymmetricVectorField> {
    let u1 = ScalarGrid3::sample(spec, "u1", |x, y, z| f(x, y, z)[0]);
    let u2 = ScalarGrid3::sample(spec, "u2", |x, y, z| f(x, y, z)[1]);
    let u3 = ScalarGrid3::sample(spec, "u3", |x, y, z| f(x, y, z)[2]);
    SymmetricVectorField::full3d(u1, u2, u3)
}

/// Helper: build a chart field from an array with explicit geometry.
pub fn chart_field_from_array(
    chart: ChartTag,
    origin: [f64; 2],
    spacing: [f64; 2],
    values: Array2<f64>,
    name: impl Into<String>,
) -> Result<ScalarChartField> {
    ScalarChartField::new(chart, origin, spacing, values, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotational_eval_rotates_components() {
        // u_theta = r, others zero: at (0, r0, z) the cartesian field is (-r0, 0, 0).
        let f = sample_rotational([0.0, -1.0], [2.0, 1.0], [33, 33], |r, _z| [0.0, r, 0.0]).unwrap();
        let v = f.eval_cartesian([0.0, 0.5, 0.0]).unwrap();
        assert!((v[0] + 0.5).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn z_planar_rotation_angle_uses_antiderivative() {
        // factor = 1 so the angle is -x3; v = (1, 0) everywhere.
        let factor = RadialProfile::constant(1.0, -4.0, 4.0, "one").unwrap();
        let v1 = ScalarChartField::sample(ChartTag::CartesianXy, [-1.0, -1.0], [1.0, 1.0], [5, 5], "v1", |_, _| 1.0).unwrap();
        let v2 = ScalarChartField::sample(ChartTag::CartesianXy, [-1.0, -1.0], [1.0, 1.0], [5, 5], "v2", |_, _| 0.0).unwrap();
        let f = SymmetricVectorField::z_planar(v1, v2, factor).unwrap();
        let z = 0.7;
        let v = f.eval_cartesian([0.0, 0.0, z]).unwrap();
        // antiderivative is x3 - (-4), a constant offset; rotation by a
        // constant extra angle is still a rigid rotation of the plane.
        let ang = -(z + 4.0);
        assert!((v[0] - ang.cos()).abs() < 1e-12);
        assert!((v[1] - ang.sin()).abs() < 1e-12);
    }

    #[test]
    fn resample_round_trips_linear_fields() {
        let f = sample_translational([-1.0, -1.0], [1.0, 1.0], [17, 17], |x, y| [x + y, x - y, 1.0]).unwrap();
        let spec = GridSpec3::rect([-0.9, -0.9, 0.0], [0.9, 0.9, 1.0], [9, 9, 3]).unwrap();
        let g = f.resample(&spec).unwrap();
        let v = g.eval_cartesian([0.35, -0.15, 0.5]).unwrap();
        assert!((v[0] - 0.2).abs() < 1e-12);
        assert!((v[1] - 0.5).abs() < 1e-12);
        assert!((v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_grids_are_rejected() {
        let a = ScalarChartField::sample(ChartTag::CartesianXy, [0.0, 0.0], [1.0, 1.0], [5, 5], "a", |_, _| 0.0).unwrap();
        let b = ScalarChartField::sample(ChartTag::CartesianXy, [0.0, 0.0], [2.0, 2.0], [5, 5], "b", |_, _| 0.0).unwrap();
        assert!(SymmetricVectorField::translational(a.clone(), b, a).is_err());
    }
}

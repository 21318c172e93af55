//! Generators for eigenfields of curl: closed-form flows, radially layered
//! flows from an ODE integration, planar-rotated harmonic flows, and the
//! stream-function reconstructions for the two symmetric reductions.

use ndarray::Array2;

use crate::chart::{ChartTag, GridSpec3, ScalarChartField};
use crate::error::{Error, Result};
use crate::ops::{diff2_axis, Factor, Wrap};
use crate::profile::RadialProfile;
use crate::vector::{sample_full3d, SymmetricVectorField};

/// Triply periodic trigonometric flow with factor 1: each component mixes a
/// sine and cosine of the transverse coordinates with weights (a, b, c).
pub fn abc_field(a: f64, b: f64, c: f64, spec: &GridSpec3) -> Result<SymmetricVectorField> {
    sample_full3d(spec, |x, y, z| {
        [
            a * z.sin() + c * y.cos(),
            b * x.sin() + a * z.cos(),
            c * y.sin() + b * x.cos(),
        ]
    })
}

/// Radially layered flow: u = u_theta(r) e_theta + u_z(r) e_z with factor
/// f(r), integrated from prescribed values at r0 > 0 by the system
///
/// ```text
/// d(u_theta)/dr = f u_z - u_theta / r
/// d(u_z)/dr     = -f u_theta
/// ```
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub r0: f64,
    pub step: f64,
    pub u_theta: Vec<f64>,
    pub u_z: Vec<f64>,
    pub factor: RadialProfile,
}

pub fn radial_beltrami(
    factor: &RadialProfile,
    r0: f64,
    r_end: f64,
    step_hint: f64,
    u_theta0: f64,
    u_z0: f64,
) -> Result<RadialSolution> {
    if r0 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radial integration starts at r0 > 0, got {}",
            r0
        )));
    }
    if r_end <= r0 || step_hint <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bad radial span [{}, {}] with step {}",
            r0, r_end, step_hint
        )));
    }
    let n = ((r_end - r0) / step_hint).round().max(1.0) as usize;
    let h = (r_end - r0) / n as f64;
    let rhs = |r: f64, ut: f64, uz: f64| -> Result<[f64; 2]> {
        let f = factor.eval(r)?;
        Ok([f * uz - ut / r, -f * ut])
    };
    let mut u_theta = Vec::with_capacity(n + 1);
    let mut u_z = Vec::with_capacity(n + 1);
    let (mut ut, mut uz) = (u_theta0, u_z0);
    u_theta.push(ut);
    u_z.push(uz);
    for i in 0..n {
        let r = r0 + i as f64 * h;
        let k1 = rhs(r, ut, uz)?;
        let k2 = rhs(r + 0.5 * h, ut + 0.5 * h * k1[0], uz + 0.5 * h * k1[1])?;
        let k3 = rhs(r + 0.5 * h, ut + 0.5 * h * k2[0], uz + 0.5 * h * k2[1])?;
        let k4 = rhs(r + h, ut + h * k3[0], uz + h * k3[1])?;
        ut += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        uz += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        u_theta.push(ut);
        u_z.push(uz);
        if !ut.is_finite() || !uz.is_finite() {
            return Err(Error::NonFinite(format!("radial integration at r = {}", r + h)));
        }
    }
    Ok(RadialSolution {
        r0,
        step: h,
        u_theta,
        u_z,
        factor: factor.clone(),
    })
}

impl RadialSolution {
    pub fn r_end(&self) -> f64 {
        self.r0 + (self.u_theta.len() - 1) as f64 * self.step
    }

    /// Values (u_theta, u_z) at radius r, by Hermite interpolation with
    /// slopes recomputed from the governing system at the bracketing nodes.
    pub fn sample(&self, r: f64) -> Result<[f64; 2]> {
        let n = self.u_theta.len();
        let u = (r - self.r0) / self.step;
        let eps = 1e-9;
        if u < -eps || u > (n - 1) as f64 + eps {
            return Err(Error::ProfileDomain {
                value: r,
                lo: self.r0,
                hi: self.r_end(),
            });
        }
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let t = u - i as f64;
        let h = self.step;
        let mut out = [0.0; 2];
        let vals = [&self.u_theta, &self.u_z];
        let slope = |k: usize| -> Result<[f64; 2]> {
            let r = self.r0 + k as f64 * h;
            let f = self.factor.eval(r)?;
            Ok([
                f * self.u_z[k] - self.u_theta[k] / r,
                -f * self.u_theta[k],
            ])
        };
        let m0 = slope(i)?;
        let m1 = slope(i + 1)?;
        let t2 = t * t;
        let t3 = t2 * t;
        let (h00, h10, h01, h11) = (
            2.0 * t3 - 3.0 * t2 + 1.0,
            t3 - 2.0 * t2 + t,
            -2.0 * t3 + 3.0 * t2,
            t3 - t2,
        );
        for c in 0..2 {
            out[c] = h00 * vals[c][i] + h10 * h * m0[c] + h01 * vals[c][i + 1] + h11 * h * m1[c];
        }
        Ok(out)
    }

    /// Sample onto an axisymmetric meridional grid spanning [r_lo, r_hi] x
    /// [z_lo, z_hi], together with the matching factor field.
    pub fn to_rotational(
        &self,
        r_lo: f64,
        r_hi: f64,
        z_lo: f64,
        z_hi: f64,
        shape: [usize; 2],
    ) -> Result<(SymmetricVectorField, Factor)> {
        if r_lo < self.r0 - 1e-12 || r_hi > self.r_end() + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "requested radial span [{}, {}] exceeds the integrated span [{}, {}]",
                r_lo,
                r_hi,
                self.r0,
                self.r_end()
            )));
        }
        let mut ut = Array2::zeros((shape[0], shape[1]));
        let mut uz = Array2::zeros((shape[0], shape[1]));
        let mut fv = Array2::zeros((shape[0], shape[1]));
        let hr = (r_hi - r_lo) / (shape[0] - 1) as f64;
        for i in 0..shape[0] {
            let r = r_lo + i as f64 * hr;
            let s = self.sample(r)?;
            let f = self.factor.eval(r)?;
            for j in 0..shape[1] {
                ut[[i, j]] = s[0];
                uz[[i, j]] = s[1];
                fv[[i, j]] = f;
            }
        }
        let zeros = Array2::zeros((shape[0], shape[1]));
        let spacing = [hr, (z_hi - z_lo) / (shape[1] - 1) as f64];
        let origin = [r_lo, z_lo];
        let mk = |vals: Array2<f64>, name: &str| {
            ScalarChartField::new(ChartTag::MeridionalRz, origin, spacing, vals, name)
        };
        let field = SymmetricVectorField::rotational(
            mk(zeros, "u_r")?,
            mk(ut, "u_theta")?,
            mk(uz, "u_z")?,
        )?;
        let factor = Factor::Chart(mk(fv, "factor")?);
        Ok((field, factor))
    }
}

/// Planar-rotated harmonic flow: a planar field v(x1, x2) rotated about x3
/// by the antiderivative of the axial factor. The construction yields an
/// eigenfield of curl exactly when v is divergence-free and planar-curl-free
/// (the two defects mix under the rotation); both are checked discretely.
pub fn rotated_harmonic_field(
    v1: ScalarChartField,
    v2: ScalarChartField,
    factor: RadialProfile,
    tol: f64,
) -> Result<SymmetricVectorField> {
    v1.check_same_grid(&v2, "planar components")?;
    let (h1, h2) = (v1.spacing[0], v1.spacing[1]);
    let div = diff2_axis(&v1.values, 0, h1, Wrap::Clamped) + diff2_axis(&v2.values, 1, h2, Wrap::Clamped);
    let curl = diff2_axis(&v2.values, 0, h1, Wrap::Clamped) - diff2_axis(&v1.values, 1, h2, Wrap::Clamped);
    let max_div = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_curl = curl.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = v1.max_abs().max(v2.max_abs()).max(1e-300);
    if max_div > tol * scale {
        return Err(Error::Validation(format!(
            "planar field is not divergence-free: max |div v| = {:.3e} vs scale {:.3e}",
            max_div, scale
        )));
    }
    if max_curl > tol * scale {
        return Err(Error::Validation(format!(
            "planar field is not curl-free: max |curl v| = {:.3e} vs scale {:.3e}",
            max_curl, scale
        )));
    }
    SymmetricVectorField::z_planar(v1, v2, factor)
}

/// Evaluate a profile (or its derivative) through a stream function,
/// nodewise on the stream function's grid.
pub fn compose_profile(
    psi: &ScalarChartField,
    profile: &RadialProfile,
    derivative: bool,
    name: &str,
) -> Result<ScalarChartField> {
    let [n1, n2] = psi.shape();
    let mut out = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let s = psi.values[[i, j]];
            out[[i, j]] = if derivative {
                profile.deriv(s)?
            } else {
                profile.eval(s)?
            };
        }
    }
    ScalarChartField::new(psi.chart, psi.origin, psi.spacing, out, name)
}

/// Field with translational symmetry from a stream function: the planar part
/// is the rotated gradient of psi and the axial part is a function of psi.
/// The factor is the derivative of that function along psi.
pub fn reconstruct_translational(
    psi: &ScalarChartField,
    axial: &RadialProfile,
) -> Result<(SymmetricVectorField, Factor)> {
    if psi.chart != ChartTag::CartesianXy {
        return Err(Error::ChartMismatch(format!(
            "translational reconstruction expects cartesian-xy, got {}",
            psi.chart.as_str()
        )));
    }
    let d1 = diff2_axis(&psi.values, 0, psi.spacing[0], Wrap::Clamped);
    let d2 = diff2_axis(&psi.values, 1, psi.spacing[1], Wrap::Clamped);
    let u3 = compose_profile(psi, axial, false, "u3")?;
    let f = compose_profile(psi, axial, true, "factor")?;
    let mk = |vals: Array2<f64>, name: &str| {
        ScalarChartField::new(psi.chart, psi.origin, psi.spacing, vals, name)
    };
    let field = SymmetricVectorField::translational(mk(d2, "u1")?, mk(-d1, "u2")?, u3)?;
    Ok((field, Factor::Chart(f)))
}

/// Axisymmetric field from a flux function on a meridional grid with r > 0:
/// the poloidal part is the rotated gradient of psi over r and the swirl is
/// a function of psi over r. The factor is the derivative of that function.
pub fn reconstruct_rotational(
    psi: &ScalarChartField,
    swirl: &RadialProfile,
) -> Result<(SymmetricVectorField, Factor)> {
    if psi.chart != ChartTag::MeridionalRz {
        return Err(Error::ChartMismatch(format!(
            "rotational reconstruction expects meridional-rz, got {}",
            psi.chart.as_str()
        )));
    }
    if psi.origin[0] <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "flux reconstruction needs r > 0 on the grid, got r0 = {}",
            psi.origin[0]
        )));
    }
    let [n1, n2] = psi.shape();
    let dr = diff2_axis(&psi.values, 0, psi.spacing[0], Wrap::Clamped);
    let dz = diff2_axis(&psi.values, 1, psi.spacing[1], Wrap::Clamped);
    let gamma = compose_profile(psi, swirl, false, "swirl")?;
    let f = compose_profile(psi, swirl, true, "factor")?;
    let mut u_r = Array2::zeros((n1, n2));
    let mut u_t = Array2::zeros((n1, n2));
    let mut u_z = Array2::zeros((n1, n2));
    for i in 0..n1 {
        let r = psi.origin[0] + i as f64 * psi.spacing[0];
        for j in 0..n2 {
            u_r[[i, j]] = -dz[[i, j]] / r;
            u_t[[i, j]] = gamma.values[[i, j]] / r;
            u_z[[i, j]] = dr[[i, j]] / r;
        }
    }
    let mk = |vals: Array2<f64>, name: &str| {
        ScalarChartField::new(psi.chart, psi.origin, psi.spacing, vals, name)
    };
    let field = SymmetricVectorField::rotational(mk(u_r, "u_r")?, mk(u_t, "u_theta")?, mk(u_z, "u_z")?)?;
    Ok((field, Factor::Chart(f)))
}

//! Finite-difference operators on symmetric vector fields: curl, divergence,
//! proportionality residuals, first-integral defects, and the vector-Laplacian
//! identity satisfied by eigenfields of curl.
//!
//! All stencils are second order: centered differences in the interior,
//! 3-point (first derivative) and 4-point (second derivative) one-sided
//! stencils at non-periodic edges.

use ndarray::{Array2, Array3};

use crate::chart::{ChartTag, ScalarChartField, ScalarGrid3};
use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::report::{norms2_interior, norms3_interior, DiagnosticReport};
use crate::vector::SymmetricVectorField;

/// Boundary treatment for difference stencils.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Wrap {
    /// One-sided stencils at the first and last node.
    Clamped,
    /// Periodic wrap: node n-1 neighbors node 0 (grid covers one period
    /// without repeating the seam node).
    Periodic,
}

/// Proportionality factor f in curl u = f u.
#[derive(Clone, Debug)]
pub enum Factor {
    Constant(f64),
    /// f sampled on a 2D chart; evaluated on 3D points through the chart map.
    Chart(ScalarChartField),
    /// f depending on x3 only.
    AxialProfile(RadialProfile),
    Grid3(ScalarGrid3),
}

/// Scalar result of an operator, in whichever representation the input had.
#[derive(Clone, Debug)]
pub enum ScalarField {
    Chart(ScalarChartField),
    Grid3(ScalarGrid3),
}

impl ScalarField {
    pub fn norms_interior(&self, margin: usize) -> (f64, f64) {
        match self {
            ScalarField::Chart(f) => norms2_interior(&f.values, f.spacing, margin),
            ScalarField::Grid3(g) => norms3_interior(&g.values, g.spacing, margin),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.norms_interior(0).0
    }

    pub fn as_chart(&self) -> Option<&ScalarChartField> {
        match self {
            ScalarField::Chart(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_grid3(&self) -> Option<&ScalarGrid3> {
        match self {
            ScalarField::Grid3(g) => Some(g),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Difference stencils
// ---------------------------------------------------------------------------

fn d_line(get: impl Fn(usize) -> f64, n: usize, i: usize, h: f64, wrap: Wrap) -> f64 {
    match wrap {
        Wrap::Periodic => (get((i + 1) % n) - get((i + n - 1) % n)) / (2.0 * h),
        Wrap::Clamped => {
            // Two nodes only support the first-order two-point slope.
            if n == 2 {
                (get(1) - get(0)) / h
            } else if i == 0 {
                (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
            } else {
                (get(i + 1) - get(i - 1)) / (2.0 * h)
            }
        }
    }
}

fn d2_line(get: impl Fn(usize) -> f64, n: usize, i: usize, h: f64, wrap: Wrap) -> f64 {
    let hh = h * h;
    match wrap {
        Wrap::Periodic => (get((i + 1) % n) - 2.0 * get(i) + get((i + n - 1) % n)) / hh,
        Wrap::Clamped => {
            // Short lines carry less curvature information: two nodes fix a
            // line (zero second difference), three nodes a single parabola.
            if n == 2 {
                0.0
            } else if n == 3 {
                (get(0) - 2.0 * get(1) + get(2)) / hh
            } else if i == 0 {
                (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / hh
            } else if i == n - 1 {
                (2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3) - get(n - 4)) / hh
            } else {
                (get(i + 1) - 2.0 * get(i) + get(i - 1)) / hh
            }
        }
    }
}

/// First derivative of a 2D array along `axis` (0 or 1).
pub fn diff2_axis(v: &Array2<f64>, axis: usize, h: f64, wrap: Wrap) -> Array2<f64> {
    let (n1, n2) = v.dim();
    let mut out = Array2::zeros((n1, n2));
    match axis {
        0 => {
            for j in 0..n2 {
                for i in 0..n1 {
                    out[[i, j]] = d_line(|k| v[[k, j]], n1, i, h, wrap);
                }
            }
        }
        1 => {
            for i in 0..n1 {
                for j in 0..n2 {
                    out[[i, j]] = d_line(|k| v[[i, k]], n2, j, h, wrap);
                }
            }
        }
        _ => panic!("axis out of range"),
    }
    out
}

/// Second derivative of a 2D array along `axis`.
pub fn diff2_axis2(v: &Array2<f64>, axis: usize, h: f64, wrap: Wrap) -> Array2<f64> {
    let (n1, n2) = v.dim();
    let mut out = Array2::zeros((n1, n2));
    match axis {
        0 => {
            for j in 0..n2 {
                for i in 0..n1 {
                    out[[i, j]] = d2_line(|k| v[[k, j]], n1, i, h, wrap);
                }
            }
        }
        1 => {
            for i in 0..n1 {
                for j in 0..n2 {
                    out[[i, j]] = d2_line(|k| v[[i, k]], n2, j, h, wrap);
                }
            }
        }
        _ => panic!("axis out of range"),
    }
    out
}

/// First derivative of a 3D array along `axis` (0, 1, 2).
pub fn diff3_axis(v: &Array3<f64>, axis: usize, h: f64, wrap: Wrap) -> Array3<f64> {
    let (n1, n2, n3) = v.dim();
    let mut out = Array3::zeros((n1, n2, n3));
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                out[[i, j, k]] = match axis {
                    0 => d_line(|m| v[[m, j, k]], n1, i, h, wrap),
                    1 => d_line(|m| v[[i, m, k]], n2, j, h, wrap),
                    2 => d_line(|m| v[[i, j, m]], n3, k, h, wrap),
                    _ => panic!("axis out of range"),
                };
            }
        }
    }
    out
}

pub fn diff3_axis2(v: &Array3<f64>, axis: usize, h: f64, wrap: Wrap) -> Array3<f64> {
    let (n1, n2, n3) = v.dim();
    let mut out = Array3::zeros((n1, n2, n3));
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                out[[i, j, k]] = match axis {
                    0 => d2_line(|m| v[[m, j, k]], n1, i, h, wrap),
                    1 => d2_line(|m| v[[i, m, k]], n2, j, h, wrap),
                    2 => d2_line(|m| v[[i, j, m]], n3, k, h, wrap),
                    _ => panic!("axis out of range"),
                };
            }
        }
    }
    out
}

/// Gradient of a chart field: arrays of the two partials.
pub fn grad_chart(f: &ScalarChartField) -> (Array2<f64>, Array2<f64>) {
    (
        diff2_axis(&f.values, 0, f.spacing[0], Wrap::Clamped),
        diff2_axis(&f.values, 1, f.spacing[1], Wrap::Clamped),
    )
}

// ---------------------------------------------------------------------------
// Curl and divergence
// ---------------------------------------------------------------------------

/// Curl of a symmetric field, in the same representation.
///
/// Planar-rotated fields are not closed under curl on their reduced grid;
/// materialize them with [`materialize_z_planar`] first.
pub fn curl3(u: &SymmetricVectorField, wrap: Wrap) -> Result<SymmetricVectorField> {
    match u {
        SymmetricVectorField::Translational { u1, u2, u3 } => {
            let (h1, h2) = (u1.spacing[0], u1.spacing[1]);
            let d2u3 = diff2_axis(&u3.values, 1, h2, Wrap::Clamped);
            let d1u3 = diff2_axis(&u3.values, 0, h1, Wrap::Clamped);
            let d1u2 = diff2_axis(&u2.values, 0, h1, Wrap::Clamped);
            let d2u1 = diff2_axis(&u1.values, 1, h2, Wrap::Clamped);
            let mk = |vals: Array2<f64>, name: &str| ScalarChartField {
                chart: ChartTag::CartesianXy,
                origin: u1.origin,
                spacing: u1.spacing,
                values: vals,
                name: name.to_string(),
            };
            SymmetricVectorField::translational(
                mk(d2u3, "curl1"),
                mk(-d1u3, "curl2"),
                mk(d1u2 - d2u1, "curl3"),
            )
        }
        SymmetricVectorField::Rotational { u_r, u_theta, u_z } => {
            let (hr, hz) = (u_r.spacing[0], u_r.spacing[1]);
            let dz_ut = diff2_axis(&u_theta.values, 1, hz, Wrap::Clamped);
            let dz_ur = diff2_axis(&u_r.values, 1, hz, Wrap::Clamped);
            let dr_uz = diff2_axis(&u_z.values, 0, hr, Wrap::Clamped);
            let dr_ut = diff2_axis(&u_theta.values, 0, hr, Wrap::Clamped);
            let [n1, n2] = u_r.shape();
            let mut c_r = Array2::zeros((n1, n2));
            let mut c_t = Array2::zeros((n1, n2));
            let mut c_z = Array2::zeros((n1, n2));
            for i in 0..n1 {
                let r = u_r.origin[0] + i as f64 * hr;
                for j in 0..n2 {
                    c_r[[i, j]] = -dz_ut[[i, j]];
                    c_t[[i, j]] = dz_ur[[i, j]] - dr_uz[[i, j]];
                    c_z[[i, j]] = if r.abs() < 1e-14 {
                        // On the axis a regular field has u_theta = 0, so
                        // u_theta / r limits to its radial derivative.
                        2.0 * dr_ut[[i, j]]
                    } else {
                        dr_ut[[i, j]] + u_theta.values[[i, j]] / r
                    };
                }
            }
            let mk = |vals: Array2<f64>, name: &str| ScalarChartField {
                chart: ChartTag::MeridionalRz,
                origin: u_r.origin,
                spacing: u_r.spacing,
                values: vals,
                name: name.to_string(),
            };
            SymmetricVectorField::rotational(mk(c_r, "curl_r"), mk(c_t, "curl_theta"), mk(c_z, "curl_z"))
        }
        SymmetricVectorField::ZPlanar { .. } => Err(Error::UnsupportedCase(
            "curl of a planar-rotated field is not planar; materialize it onto a 3D box first".into(),
        )),
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let h = u1.spacing;
            let d2u3 = diff3_axis(&u3.values, 1, h[1], wrap);
            let d3u2 = diff3_axis(&u2.values, 2, h[2], wrap);
            let d3u1 = diff3_axis(&u1.values, 2, h[2], wrap);
            let d1u3 = diff3_axis(&u3.values, 0, h[0], wrap);
            let d1u2 = diff3_axis(&u2.values, 0, h[0], wrap);
            let d2u1 = diff3_axis(&u1.values, 1, h[1], wrap);
            let mk = |vals: Array3<f64>, name: &str| ScalarGrid3 {
                origin: u1.origin,
                spacing: u1.spacing,
                values: vals,
                name: name.to_string(),
            };
            SymmetricVectorField::full3d(
                mk(d2u3 - d3u2, "curl1"),
                mk(d3u1 - d1u3, "curl2"),
                mk(d1u2 - d2u1, "curl3"),
            )
        }
    }
}

/// Divergence of a symmetric field.
pub fn divergence(u: &SymmetricVectorField, wrap: Wrap) -> Result<ScalarField> {
    match u {
        SymmetricVectorField::Translational { u1, u2, .. } => {
            let d1 = diff2_axis(&u1.values, 0, u1.spacing[0], Wrap::Clamped);
            let d2 = diff2_axis(&u2.values, 1, u1.spacing[1], Wrap::Clamped);
            Ok(ScalarField::Chart(ScalarChartField {
                chart: ChartTag::CartesianXy,
                origin: u1.origin,
                spacing: u1.spacing,
                values: d1 + d2,
                name: "div".into(),
            }))
        }
        SymmetricVectorField::Rotational { u_r, u_z, .. } => {
            let dr = diff2_axis(&u_r.values, 0, u_r.spacing[0], Wrap::Clamped);
            let dz = diff2_axis(&u_z.values, 1, u_r.spacing[1], Wrap::Clamped);
            let [n1, n2] = u_r.shape();
            let mut out = Array2::zeros((n1, n2));
            for i in 0..n1 {
                let r = u_r.origin[0] + i as f64 * u_r.spacing[0];
                for j in 0..n2 {
                    out[[i, j]] = if r.abs() < 1e-14 {
                        2.0 * dr[[i, j]] + dz[[i, j]]
                    } else {
                        dr[[i, j]] + u_r.values[[i, j]] / r + dz[[i, j]]
                    };
                }
            }
            Ok(ScalarField::Chart(ScalarChartField {
                chart: ChartTag::MeridionalRz,
                origin: u_r.origin,
                spacing: u_r.spacing,
                values: out,
                name: "div".into(),
            }))
        }
        SymmetricVectorField::ZPlanar { .. } => Err(Error::UnsupportedCase(
            "divergence of a planar-rotated field is not planar; materialize it onto a 3D box first"
                .into(),
        )),
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let h = u1.spacing;
            let d1 = diff3_axis(&u1.values, 0, h[0], wrap);
            let d2 = diff3_axis(&u2.values, 1, h[1], wrap);
            let d3 = diff3_axis(&u3.values, 2, h[2], wrap);
            Ok(ScalarField::Grid3(ScalarGrid3 {
                origin: u1.origin,
                spacing: u1.spacing,
                values: d1 + d2 + d3,
                name: "div".into(),
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// Factor evaluation
// ---------------------------------------------------------------------------

impl Factor {
    /// Value on the reduced 2D chart of a translational or rotational field.
    pub fn at_chart(&self, chart: ChartTag, x: [f64; 2]) -> Result<f64> {
        match self {
            Factor::Constant(c) => Ok(*c),
            Factor::Chart(f) => {
                if f.chart != chart {
                    return Err(Error::ChartMismatch(format!(
                        "factor on {} applied to a {} field",
                        f.chart.as_str(),
                        chart.as_str()
                    )));
                }
                f.bilinear(x)
            }
            Factor::AxialProfile(_) => Err(Error::UnsupportedCase(
                "an axial factor varies along the invariant direction of a reduced field".into(),
            )),
            Factor::Grid3(_) => Err(Error::UnsupportedCase(
                "a 3D factor cannot be evaluated on a reduced 2D chart".into(),
            )),
        }
    }

    /// Value at a 3D cartesian point.
    pub fn at_point(&self, x: [f64; 3]) -> Result<f64> {
        match self {
            Factor::Constant(c) => Ok(*c),
            Factor::Chart(f) => match f.chart {
                ChartTag::CartesianXy => f.bilinear([x[0], x[1]]),
                ChartTag::MeridionalRz => {
                    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    f.bilinear([r, x[2]])
                }
                ChartTag::ThetaZ => {
                    let theta = wrap_angle_into(f, x[1].atan2(x[0]))?;
                    f.bilinear([theta, x[2]])
                }
                ChartTag::Full3d => Err(Error::ChartMismatch(
                    "factor chart tag full-3d carries no coordinate map".into(),
                )),
            },
            Factor::AxialProfile(p) => p.eval(x[2]),
            Factor::Grid3(g) => g.trilinear(x),
        }
    }

    /// Cartesian gradient at a 3D point. Chart factors differentiate on
    /// their own 2D grid and push the result through the chart map, which
    /// keeps the accuracy of the reduced-grid stencil.
    pub fn gradient_at_point(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match self {
            Factor::Constant(_) => Ok([0.0; 3]),
            Factor::AxialProfile(p) => Ok([0.0, 0.0, p.deriv(x[2])?]),
            Factor::Chart(f) => {
                let (g1, g2) = grad_chart(f);
                let mk = |vals: Array2<f64>| ScalarChartField {
                    chart: f.chart,
                    origin: f.origin,
                    spacing: f.spacing,
                    values: vals,
                    name: String::new(),
                };
                let (g1f, g2f) = (mk(g1), mk(g2));
                chart_gradient_to_cartesian(f.chart, &g1f, &g2f, x)
            }
            Factor::Grid3(g) => {
                let gx = diff3_axis(&g.values, 0, g.spacing[0], Wrap::Clamped);
                let gy = diff3_axis(&g.values, 1, g.spacing[1], Wrap::Clamped);
                let gz = diff3_axis(&g.values, 2, g.spacing[2], Wrap::Clamped);
                let mk = |vals: Array3<f64>| ScalarGrid3 {
                    origin: g.origin,
                    spacing: g.spacing,
                    values: vals,
                    name: String::new(),
                };
                Ok([mk(gx).trilinear(x)?, mk(gy).trilinear(x)?, mk(gz).trilinear(x)?])
            }
        }
    }
}

fn wrap_angle_into(f: &ScalarChartField, theta: f64) -> Result<f64> {
    let lo = f.origin[0];
    let hi = f.axis_max()[0];
    let mut t = theta;
    for _ in 0..3 {
        if t < lo {
            t += std::f64::consts::TAU;
        } else if t > hi {
            t -= std::f64::consts::TAU;
        } else {
            break;
        }
    }
    if t < lo - 1e-9 || t > hi + 1e-9 {
        return Err(Error::OutsideGrid(theta, 0.0));
    }
    Ok(t.clamp(lo, hi))
}

fn chart_gradient_to_cartesian(
    chart: ChartTag,
    g1: &ScalarChartField,
    g2: &ScalarChartField,
    x: [f64; 3],
) -> Result<[f64; 3]> {
    match chart {
        ChartTag::CartesianXy => Ok([g1.bilinear([x[0], x[1]])?, g2.bilinear([x[0], x[1]])?, 0.0]),
        ChartTag::MeridionalRz => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let fr = g1.bilinear([r, x[2]])?;
            let fz = g2.bilinear([r, x[2]])?;
            if r < 1e-14 {
                return Ok([0.0, 0.0, fz]);
            }
            Ok([fr * x[0] / r, fr * x[1] / r, fz])
        }
        ChartTag::ThetaZ => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 1e-14 {
                return Err(Error::OutsideGrid(x[0], x[1]));
            }
            let theta = wrap_angle_into(g1, x[1].atan2(x[0]))?;
            let ft = g1.bilinear([theta, x[2]])?;
            let fz = g2.bilinear([theta, x[2]])?;
            // grad = (f_theta / r) e_theta + f_z e_z, e_theta = (-y, x)/r.
            Ok([-ft * x[1] / (r * r), ft * x[0] / (r * r), fz])
        }
        ChartTag::Full3d => Err(Error::ChartMismatch(
            "factor chart tag full-3d carries no coordinate map".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Residual diagnostics
// ---------------------------------------------------------------------------

fn factor_on_chart(f: &Factor, like: &ScalarChartField) -> Result<Array2<f64>> {
    let [n1, n2] = like.shape();
    let mut out = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            out[[i, j]] = f.at_chart(like.chart, like.coord(i, j))?;
        }
    }
    Ok(out)
}

fn factor_on_grid3(f: &Factor, like: &ScalarGrid3) -> Result<Array3<f64>> {
    let [n1, n2, n3] = like.shape();
    let mut out = Array3::zeros((n1, n2, n3));
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                out[[i, j, k]] = f.at_point(like.coord(i, j, k))?;
            }
        }
    }
    Ok(out)
}

/// Residual of the eigenfield relation curl u - f u, with norms over the
/// interior (margin 2 for clamped boundaries, 0 for periodic 3D data).
///
/// Planar-rotated fields are materialized onto an aligned 3D box first; the
/// box reuses the planar grid in (x1, x2) and spans the factor's domain in
/// x3 with a comparable number of nodes.
pub fn beltrami_residual(
    u: &SymmetricVectorField,
    f: &Factor,
    wrap: Wrap,
) -> Result<(SymmetricVectorField, DiagnosticReport)> {
    if let SymmetricVectorField::ZPlanar { v1, .. } = u {
        let n3 = v1.shape()[0].max(4);
        let mat = materialize_z_planar(u, n3)?;
        return beltrami_residual(&mat, f, Wrap::Clamped);
    }
    let c = curl3(u, wrap)?;
    let mut report = DiagnosticReport::new();
    match (&c, u) {
        (
            SymmetricVectorField::Translational { u1: c1, u2: c2, u3: c3 },
            SymmetricVectorField::Translational { u1, u2, u3 },
        )
        | (
            SymmetricVectorField::Rotational { u_r: c1, u_theta: c2, u_z: c3 },
            SymmetricVectorField::Rotational { u_r: u1, u_theta: u2, u_z: u3 },
        ) => {
            let fv = factor_on_chart(f, u1)?;
            let mut res = Vec::with_capacity(3);
            for (cc, uc) in [(c1, u1), (c2, u2), (c3, u3)] {
                let vals = &cc.values - &(&fv * &uc.values);
                res.push(ScalarChartField {
                    chart: u1.chart,
                    origin: u1.origin,
                    spacing: u1.spacing,
                    values: vals,
                    name: format!("residual_{}", uc.name),
                });
            }
            let margin = 2;
            let hmin = u1.spacing[0].min(u1.spacing[1]);
            let mut worst_inf = 0.0f64;
            let mut sum_sq = 0.0f64;
            for r in &res {
                let (ni, nl2) = norms2_interior(&r.values, u1.spacing, margin);
                report.push(&r.name, ni, nl2, hmin);
                worst_inf = worst_inf.max(ni);
                sum_sq += nl2 * nl2;
            }
            report.push("residual_total", worst_inf, sum_sq.sqrt(), hmin);
            let r3 = res.pop().unwrap();
            let r2 = res.pop().unwrap();
            let r1 = res.pop().unwrap();
            let out = match u {
                SymmetricVectorField::Translational { .. } => {
                    SymmetricVectorField::translational(r1, r2, r3)?
                }
                _ => SymmetricVectorField::rotational(r1, r2, r3)?,
            };
            Ok((out, report))
        }
        (
            SymmetricVectorField::Full3d { u1: c1, u2: c2, u3: c3 },
            SymmetricVectorField::Full3d { u1, u2, u3 },
        ) => {
            let fv = factor_on_grid3(f, u1)?;
            let mut res = Vec::with_capacity(3);
            for (cc, uc) in [(c1, u1), (c2, u2), (c3, u3)] {
                let vals = &cc.values - &(&fv * &uc.values);
                res.push(ScalarGrid3 {
                    origin: u1.origin,
                    spacing: u1.spacing,
                    values: vals,
                    name: format!("residual_{}", uc.name),
                });
            }
            let margin = if wrap == Wrap::Periodic { 0 } else { 2 };
            let hmin = u1.spacing[0].min(u1.spacing[1]).min(u1.spacing[2]);
            let mut worst_inf = 0.0f64;
            let mut sum_sq = 0.0f64;
            for r in &res {
                let (ni, nl2) = norms3_interior(&r.values, u1.spacing, margin);
                report.push(&r.name, ni, nl2, hmin);
                worst_inf = worst_inf.max(ni);
                sum_sq += nl2 * nl2;
            }
            report.push("residual_total", worst_inf, sum_sq.sqrt(), hmin);
            let r3 = res.pop().unwrap();
            let r2 = res.pop().unwrap();
            let r1 = res.pop().unwrap();
            Ok((SymmetricVectorField::full3d(r1, r2, r3)?, report))
        }
        _ => unreachable!("curl preserves representation"),
    }
}

/// Sample a planar-rotated field onto a 3D box aligned with its planar grid.
///
/// Node values in (x1, x2) are taken directly from the component arrays, so
/// no interpolation error enters; only the exact rotation varies along x3.
pub fn materialize_z_planar(u: &SymmetricVectorField, n3: usize) -> Result<SymmetricVectorField> {
    let SymmetricVectorField::ZPlanar { v1, v2, factor } = u else {
        return Err(Error::UnsupportedCase("materialize expects a planar-rotated field".into()));
    };
    if n3 < 4 {
        return Err(Error::GridTooSmall(format!("n3 = {}", n3)));
    }
    let [n1, n2] = v1.shape();
    let z0 = factor.start;
    let h3 = (factor.end() - z0) / (n3 - 1) as f64;
    let origin = [v1.origin[0], v1.origin[1], z0];
    let spacing = [v1.spacing[0], v1.spacing[1], h3];
    let mut a1 = Array3::zeros((n1, n2, n3));
    let mut a2 = Array3::zeros((n1, n2, n3));
    let a3 = Array3::zeros((n1, n2, n3));
    for k in 0..n3 {
        let z = z0 + k as f64 * h3;
        let ang = -factor.antiderivative(z)?;
        let (c, s) = (ang.cos(), ang.sin());
        for i in 0..n1 {
            for j in 0..n2 {
                let a = v1.values[[i, j]];
                let b = v2.values[[i, j]];
                a1[[i, j, k]] = c * a - s * b;
                a2[[i, j, k]] = s * a + c * b;
            }
        }
    }
    let mk = |vals: Array3<f64>, name: &str| ScalarGrid3 {
        origin,
        spacing,
        values: vals,
        name: name.to_string(),
    };
    SymmetricVectorField::full3d(mk(a1, "u1"), mk(a2, "u2"), mk(a3, "u3"))
}

/// Defect field of the first integral u . grad f, which vanishes identically
/// for an eigenfield of curl with factor f.
pub fn first_integral_defect(u: &SymmetricVectorField, f: &Factor, wrap: Wrap) -> Result<ScalarField> {
    match u {
        SymmetricVectorField::Translational { u1, u2, .. } => {
            let fv = factor_on_chart(f, u1)?;
            let fx = diff2_axis(&fv, 0, u1.spacing[0], Wrap::Clamped);
            let fy = diff2_axis(&fv, 1, u1.spacing[1], Wrap::Clamped);
            let vals = &(&u1.values * &fx) + &(&u2.values * &fy);
            Ok(ScalarField::Chart(ScalarChartField {
                chart: u1.chart,
                origin: u1.origin,
                spacing: u1.spacing,
                values: vals,
                name: "first_integral_defect".into(),
            }))
        }
        SymmetricVectorField::Rotational { u_r, u_z, .. } => {
            let fv = factor_on_chart(f, u_r)?;
            let fr = diff2_axis(&fv, 0, u_r.spacing[0], Wrap::Clamped);
            let fz = diff2_axis(&fv, 1, u_r.spacing[1], Wrap::Clamped);
            let vals = &(&u_r.values * &fr) + &(&u_z.values * &fz);
            Ok(ScalarField::Chart(ScalarChartField {
                chart: u_r.chart,
                origin: u_r.origin,
                spacing: u_r.spacing,
                values: vals,
                name: "first_integral_defect".into(),
            }))
        }
        SymmetricVectorField::ZPlanar { v1, .. } => {
            let n3 = v1.shape()[0].max(4);
            let mat = materialize_z_planar(u, n3)?;
            first_integral_defect(&mat, f, Wrap::Clamped)
        }
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let [n1, n2, n3] = u1.shape();
            let mut vals = Array3::zeros((n1, n2, n3));
            match f {
                Factor::Grid3(g) => {
                    if !g.same_grid(u1) {
                        return Err(Error::IncompatibleGrids("factor grid vs field grid".into()));
                    }
                    let gx = diff3_axis(&g.values, 0, g.spacing[0], wrap);
                    let gy = diff3_axis(&g.values, 1, g.spacing[1], wrap);
                    let gz = diff3_axis(&g.values, 2, g.spacing[2], wrap);
                    vals = &(&u1.values * &gx) + &(&u2.values * &gy) + &(&u3.values * &gz);
                }
                _ => {
                    for i in 0..n1 {
                        for j in 0..n2 {
                            for k in 0..n3 {
                                let x = u1.coord(i, j, k);
                                let g = f.gradient_at_point(x)?;
                                vals[[i, j, k]] = u1.values[[i, j, k]] * g[0]
                                    + u2.values[[i, j, k]] * g[1]
                                    + u3.values[[i, j, k]] * g[2];
                            }
                        }
                    }
                }
            }
            Ok(ScalarField::Grid3(ScalarGrid3 {
                origin: u1.origin,
                spacing: u1.spacing,
                values: vals,
                name: "first_integral_defect".into(),
            }))
        }
    }
}

/// Residual of the second-order identity -lap(u) = grad f x u + f^2 u, which
/// every eigenfield of curl satisfies componentwise.
pub fn elliptic_identity_residual(
    u: &SymmetricVectorField,
    f: &Factor,
    wrap: Wrap,
) -> Result<(ScalarField, DiagnosticReport)> {
    let mut report = DiagnosticReport::new();
    match u {
        SymmetricVectorField::Translational { u1, u2, u3 } => {
            let (h1, h2) = (u1.spacing[0], u1.spacing[1]);
            let fv = factor_on_chart(f, u1)?;
            let fx = diff2_axis(&fv, 0, h1, Wrap::Clamped);
            let fy = diff2_axis(&fv, 1, h2, Wrap::Clamped);
            let lap = |a: &Array2<f64>| {
                diff2_axis2(a, 0, h1, Wrap::Clamped) + diff2_axis2(a, 1, h2, Wrap::Clamped)
            };
            let ff = &fv * &fv;
            // grad f x u = (f_y u3, -f_x u3, f_x u2 - f_y u1)
            let r1 = -lap(&u1.values) - (&fy * &u3.values) - &(&ff * &u1.values);
            let r2 = -lap(&u2.values) + (&fx * &u3.values) - &(&ff * &u2.values);
            let r3 = -lap(&u3.values) - (&fx * &u2.values) + (&fy * &u1.values)
                - &(&ff * &u3.values);
            finalize_elliptic_2d(u1, [r1, r2, r3], &mut report)
        }
        SymmetricVectorField::Rotational { u_r, u_theta, u_z } => {
            let (hr, hz) = (u_r.spacing[0], u_r.spacing[1]);
            let [n1, n2] = u_r.shape();
            let fv = factor_on_chart(f, u_r)?;
            let fr = diff2_axis(&fv, 0, hr, Wrap::Clamped);
            let fz = diff2_axis(&fv, 1, hz, Wrap::Clamped);
            let meridional_lap = |a: &Array2<f64>| -> Array2<f64> {
                let arr = diff2_axis2(a, 0, hr, Wrap::Clamped);
                let ar = diff2_axis(a, 0, hr, Wrap::Clamped);
                let azz = diff2_axis2(a, 1, hz, Wrap::Clamped);
                let mut out = Array2::zeros((n1, n2));
                for i in 0..n1 {
                    let r = u_r.origin[0] + i as f64 * hr;
                    for j in 0..n2 {
                        let over_r = if r.abs() < 1e-14 { 0.0 } else { ar[[i, j]] / r };
                        out[[i, j]] = arr[[i, j]] + over_r + azz[[i, j]];
                    }
                }
                out
            };
            if u_r.origin[0].abs() < 1e-14 {
                return Err(Error::UnsupportedCase(
                    "the axisymmetric vector Laplacian needs r > 0 on the grid".into(),
                ));
            }
            let mut inv_r2 = Array2::zeros((n1, n2));
            for i in 0..n1 {
                let r = u_r.origin[0] + i as f64 * hr;
                for j in 0..n2 {
                    inv_r2[[i, j]] = 1.0 / (r * r);
                }
            }
            let ff = &fv * &fv;
            // grad f x u = (-f_z u_theta, f_z u_r - f_r u_z, f_r u_theta)
            let lap_r = meridional_lap(&u_r.values) - &(&inv_r2 * &u_r.values);
            let lap_t = meridional_lap(&u_theta.values) - &(&inv_r2 * &u_theta.values);
            let lap_z = meridional_lap(&u_z.values);
            let r1 = -lap_r + (&fz * &u_theta.values) - &(&ff * &u_r.values);
            let r2 = -lap_t - (&fz * &u_r.values) + (&fr * &u_z.values) - &(&ff * &u_theta.values);
            let r3 = -lap_z - (&fr * &u_theta.values) - &(&ff * &u_z.values);
            finalize_elliptic_2d(u_r, [r1, r2, r3], &mut report)
        }
        SymmetricVectorField::ZPlanar { v1, .. } => {
            let n3 = v1.shape()[0].max(4);
            let mat = materialize_z_planar(u, n3)?;
            elliptic_identity_residual(&mat, f, Wrap::Clamped)
        }
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let h = u1.spacing;
            let [n1, n2, n3] = u1.shape();
            let fv = factor_on_grid3(f, u1)?;
            let gx = diff3_axis(&fv, 0, h[0], wrap);
            let gy = diff3_axis(&fv, 1, h[1], wrap);
            let gz = diff3_axis(&fv, 2, h[2], wrap);
            let lap = |a: &Array3<f64>| {
                diff3_axis2(a, 0, h[0], wrap)
                    + diff3_axis2(a, 1, h[1], wrap)
                    + diff3_axis2(a, 2, h[2], wrap)
            };
            let ff = &fv * &fv;
            let r1 = -lap(&u1.values) - (&gy * &u3.values) + (&gz * &u2.values)
                - &(&ff * &u1.values);
            let r2 = -lap(&u2.values) - (&gz * &u1.values) + (&gx * &u3.values)
                - &(&ff * &u2.values);
            let r3 = -lap(&u3.values) - (&gx * &u2.values) + (&gy * &u1.values)
                - &(&ff * &u3.values);
            let margin = if wrap == Wrap::Periodic { 0 } else { 2 };
            let hmin = h[0].min(h[1]).min(h[2]);
            let mut mag = Array3::zeros((n1, n2, n3));
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        let v = [r1[[i, j, k]], r2[[i, j, k]], r3[[i, j, k]]];
                        mag[[i, j, k]] = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    }
                }
            }
            let (ni, nl2) = norms3_interior(&mag, h, margin);
            report.push("elliptic_identity", ni, nl2, hmin);
            Ok((
                ScalarField::Grid3(ScalarGrid3 {
                    origin: u1.origin,
                    spacing: u1.spacing,
                    values: mag,
                    name: "elliptic_identity".into(),
                }),
                report,
            ))
        }
    }
}

fn finalize_elliptic_2d(
    like: &ScalarChartField,
    res: [Array2<f64>; 3],
    report: &mut DiagnosticReport,
) -> Result<(ScalarField, DiagnosticReport)> {
    let [n1, n2] = like.shape();
    let mut mag = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let v = [res[0][[i, j]], res[1][[i, j]], res[2][[i, j]]];
            mag[[i, j]] = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        }
    }
    let hmin = like.spacing[0].min(like.spacing[1]);
    let (ni, nl2) = norms2_interior(&mag, like.spacing, 2);
    report.push("elliptic_identity", ni, nl2, hmin);
    Ok((
        ScalarField::Chart(ScalarChartField {
            chart: like.chart,
            origin: like.origin,
            spacing: like.spacing,
            values: mag,
            name: "elliptic_identity".into(),
        }),
        report.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{sample_full3d, sample_rotational, sample_translational};
    use crate::chart::GridSpec3;

    #[test]
    fn stencils_degrade_gracefully_on_two_and_three_node_lines() {
        // Two rows: the slope is the two-point difference, curvature zero.
        let v = ndarray::arr2(&[[1.0, 4.0], [3.0, 8.0]]);
        let d = diff2_axis(&v, 0, 0.5, Wrap::Clamped);
        assert_eq!(d[[0, 0]], 4.0);
        assert_eq!(d[[1, 1]], 8.0);
        let d2 = diff2_axis2(&v, 0, 0.5, Wrap::Clamped);
        assert_eq!(d2[[0, 0]], 0.0);

        // Three rows of a parabola: both stencils are exact everywhere.
        let q = ndarray::arr2(&[[0.0], [1.0], [4.0]]);
        let d = diff2_axis(&q, 0, 1.0, Wrap::Clamped);
        let d2 = diff2_axis2(&q, 0, 1.0, Wrap::Clamped);
        for i in 0..3 {
            assert!((d[[i, 0]] - 2.0 * i as f64).abs() < 1e-12);
            assert!((d2[[i, 0]] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - y + 0.5 * x * x + x * y - 0.25 * y * y;
        let g = ScalarChartField::sample(ChartTag::CartesianXy, [0.0, 0.0], [1.0, 1.0], [7, 7], "g", f)
            .unwrap();
        let dx = diff2_axis(&g.values, 0, g.spacing[0], Wrap::Clamped);
        let dxx = diff2_axis2(&g.values, 0, g.spacing[0], Wrap::Clamped);
        for i in 0..7 {
            for j in 0..7 {
                let [x, y] = g.coord(i, j);
                assert!((dx[[i, j]] - (2.0 + x + y)).abs() < 1e-11, "dx at {} {}", i, j);
                assert!((dxx[[i, j]] - 1.0).abs() < 1e-10, "dxx at {} {}", i, j);
            }
        }
    }

    #[test]
    fn curl_of_gradient_vanishes_identically() {
        // The numerical curl of a numerical gradient cancels exactly because
        // difference operators along distinct axes commute.
        let phi = ScalarChartField::sample(
            ChartTag::CartesianXy,
            [-1.0, -1.0],
            [1.0, 1.0],
            [21, 21],
            "phi",
            |x, y| (3.0 * x).sin() * (2.0 * y).cos() + x * x * y,
        )
        .unwrap();
        let (gx, gy) = grad_chart(&phi);
        let zero = Array2::zeros((21, 21));
        let mk = |vals: Array2<f64>, name: &str| {
            ScalarChartField::new(ChartTag::CartesianXy, phi.origin, phi.spacing, vals, name).unwrap()
        };
        let u = SymmetricVectorField::translational(mk(gx, "u1"), mk(gy, "u2"), mk(zero, "u3")).unwrap();
        let c = curl3(&u, Wrap::Clamped).unwrap();
        assert!(c.max_abs() < 1e-11);
    }

    #[test]
    fn rigid_rotation_has_constant_curl() {
        let u = sample_rotational([0.5, -1.0], [2.0, 1.0], [16, 16], |r, _z| [0.0, r, 0.0]).unwrap();
        let c = curl3(&u, Wrap::Clamped).unwrap();
        let SymmetricVectorField::Rotational { u_r, u_theta, u_z } = &c else { unreachable!() };
        assert!(u_r.max_abs() < 1e-12);
        assert!(u_theta.max_abs() < 1e-12);
        for v in u_z.values.iter() {
            assert!((v - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn radial_outflow_divergence() {
        let u = sample_rotational([0.5, 0.0], [2.0, 1.0], [16, 8], |r, _z| [r, 0.0, 0.0]).unwrap();
        let d = divergence(&u, Wrap::Clamped).unwrap();
        let f = d.as_chart().unwrap();
        for v in f.values.iter() {
            assert!((v - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn abc_field_residual_is_small_and_second_order() {
        let abc = |x: f64, y: f64, z: f64| {
            [
                z.sin() + y.cos(),
                x.sin() + z.cos(),
                y.sin() + x.cos(),
            ]
        };
        let mut errs = Vec::new();
        for &n in &[16usize, 32] {
            let h = std::f64::consts::TAU / n as f64;
            let spec = GridSpec3 {
                origin: [0.0; 3],
                spacing: [h; 3],
                shape: [n; 3],
            };
            let u = sample_full3d(&spec, abc).unwrap();
            let (_res, rep) = beltrami_residual(&u, &Factor::Constant(1.0), Wrap::Periodic).unwrap();
            errs.push((h, rep.get("residual_total").unwrap().norm_inf));
        }
        let ratio = errs[0].1 / errs[1].1;
        assert!(ratio > 3.4 && ratio < 4.6, "ratio {}", ratio);
    }

    #[test]
    fn stream_function_field_has_zero_first_integral() {
        // u = (d2 psi, -d1 psi, anything) with f = psi: u . grad f = 0.
        let psi = |x: f64, y: f64| (x * x - 1.0) * (y * y - 1.0);
        let u = sample_translational([-1.0, -1.0], [1.0, 1.0], [41, 41], |x, y| {
            [2.0 * y * (x * x - 1.0), -2.0 * x * (y * y - 1.0), 1.0]
        })
        .unwrap();
        let f = ScalarChartField::sample(ChartTag::CartesianXy, [-1.0, -1.0], [1.0, 1.0], [41, 41], "psi", psi)
            .unwrap();
        let d = first_integral_defect(&u, &Factor::Chart(f), Wrap::Clamped).unwrap();
        let (ni, _) = d.norms_interior(2);
        assert!(ni < 1e-3, "defect {}", ni);
    }

    #[test]
    fn abc_satisfies_elliptic_identity() {
        let abc = |x: f64, y: f64, z: f64| {
            [z.sin() + y.cos(), x.sin() + z.cos(), y.sin() + x.cos()]
        };
        let n = 24;
        let h = std::f64::consts::TAU / n as f64;
        let spec = GridSpec3 { origin: [0.0; 3], spacing: [h; 3], shape: [n; 3] };
        let u = sample_full3d(&spec, abc).unwrap();
        let (_d, rep) = elliptic_identity_residual(&u, &Factor::Constant(1.0), Wrap::Periodic).unwrap();
        let e = rep.get("elliptic_identity").unwrap();
        assert!(e.norm_inf < 0.06, "residual {}", e.norm_inf);
    }
}

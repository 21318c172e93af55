//! Flow-map charts on level surfaces.
//!
//! The normalized gradient flow d Phi/dt = grad f / |grad f|^2 moves points
//! from the level {f = c} to {f = c + t} in unit level per unit time,
//! turning a level curve into a chart (xi1, t) of the swept region of the
//! reduced plane, and together with the free symmetry coordinate xi2 into a
//! chart of a region of space. `evolve_chart` integrates the flow with RK4
//! from an extracted level curve and records the chart coefficients the
//! constrained evolution and the elliptic system need:
//!
//! * chi = 1 / |grad f|, the speed of the flow in the surface metric;
//! * nu = |d1 Phi| / |d2 Phi|, the tangent aspect ratio;
//! * p = chi / nu and q = chi * nu, the diagonal of the coefficient
//!   matrix B.
//!
//! The conoid case (factor depending on angle and height) is treated slice
//! by slice in the radius: the flow, chi and nu all depend on the slice
//! radius, and the chart's second tangent is the unit radial ray. Cross
//! slice derivatives of the flow map are not part of the chart data.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ops::{diff2_axis, Wrap};

use super::{extract_level_curve, ChartCase, LevelField};

/// Discretization of a chart evolution.
#[derive(Clone, Debug)]
pub struct ChartParams {
    /// Evolution time; the chart covers levels c .. c + t_end.
    pub t_end: f64,
    /// Samples along the level curve.
    pub n_xi1: usize,
    /// Time samples, including both endpoints.
    pub nt: usize,
    /// RK4 substeps per time interval.
    pub substeps: usize,
    /// Free-coordinate samples. Required for the conoid case (slice radii,
    /// all positive); optional bookkeeping for the other two.
    pub xi2: Option<Vec<f64>>,
    /// Gradient magnitude below which the level set counts as non-regular.
    pub grad_floor: f64,
}

impl ChartParams {
    pub fn new(t_end: f64, n_xi1: usize, nt: usize) -> Self {
        Self {
            t_end,
            n_xi1,
            nt,
            substeps: 1,
            xi2: None,
            grad_floor: 1e-10,
        }
    }

    pub fn with_xi2(mut self, xi2: Vec<f64>) -> Self {
        self.xi2 = Some(xi2);
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }
}

/// Chart data over one reduced-plane slice. All arrays are indexed
/// `[xi1, t]`.
#[derive(Clone, Debug)]
pub struct PlanarSlice {
    /// First plane coordinate of the flow map (x1, r, or theta by case).
    pub a: Array2<f64>,
    /// Second plane coordinate (x2 or z by case).
    pub b: Array2<f64>,
    pub d1a: Array2<f64>,
    pub d1b: Array2<f64>,
    pub dta: Array2<f64>,
    pub dtb: Array2<f64>,
    pub chi: Array2<f64>,
    pub nu: Array2<f64>,
    pub p: Array2<f64>,
    pub q: Array2<f64>,
}

/// A chart of the region swept by the gradient flow of the factor,
/// per-slice plane data plus the embedding conventions of the case.
#[derive(Clone, Debug)]
pub struct SurfaceChart {
    pub case_: ChartCase,
    /// Level of the seed curve; time t sits on level `level0 + t`.
    pub level0: f64,
    pub closed: bool,
    pub ts: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Option<Vec<f64>>,
    pub slices: Vec<PlanarSlice>,
    /// Max over all chart nodes of |f(Phi) - (level0 + t)|.
    pub level_defect: f64,
    /// Max relative deviation between chi and the centered time difference
    /// of the flow map measured in the surface metric (interior times).
    pub chi_time_check: f64,
}

/// Position and tangent pair of the chart embedding at one node.
#[derive(Clone, Copy, Debug)]
pub struct ChartFrame {
    pub position: [f64; 3],
    pub tangent1: [f64; 3],
    pub tangent2: [f64; 3],
}

impl SurfaceChart {
    pub fn n_xi1(&self) -> usize {
        self.xi1.len()
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    /// Spacing of the xi1 samples (uniform by construction).
    pub fn h1(&self) -> f64 {
        if self.closed {
            std::f64::consts::TAU / self.n_xi1() as f64
        } else {
            self.xi1[1] - self.xi1[0]
        }
    }

    pub fn dt(&self) -> f64 {
        self.ts[1] - self.ts[0]
    }

    /// Radius of a conoid slice.
    pub fn slice_radius(&self, s: usize) -> Result<f64> {
        if self.case_ != ChartCase::Conoid {
            return Err(Error::ChartMismatch(
                "slice radii only exist for conoid charts".into(),
            ));
        }
        Ok(self.xi2.as_ref().expect("conoid charts carry xi2")[s])
    }

    /// Embedding of chart node (i, k) of slice s into space, with the free
    /// coordinate at `xi2`. The conoid's free coordinate is the slice
    /// radius itself and the argument is ignored there.
    pub fn frame(&self, s: usize, i: usize, k: usize, xi2: f64) -> ChartFrame {
        let sl = &self.slices[s];
        let (a, b) = (sl.a[[i, k]], sl.b[[i, k]]);
        let (d1a, d1b) = (sl.d1a[[i, k]], sl.d1b[[i, k]]);
        match self.case_ {
            ChartCase::Cylinder => ChartFrame {
                position: [a, b, xi2],
                tangent1: [d1a, d1b, 0.0],
                tangent2: [0.0, 0.0, 1.0],
            },
            ChartCase::Revolution => {
                let (cs, sn) = (xi2.cos(), xi2.sin());
                ChartFrame {
                    position: [a * cs, a * sn, b],
                    tangent1: [d1a * cs, d1a * sn, d1b],
                    tangent2: [-a * sn, a * cs, 0.0],
                }
            }
            ChartCase::Conoid => {
                let r = self.xi2.as_ref().expect("conoid charts carry xi2")[s];
                let (cs, sn) = (a.cos(), a.sin());
                ChartFrame {
                    position: [r * cs, r * sn, b],
                    tangent1: [-r * sn * d1a, r * cs * d1a, d1b],
                    tangent2: [cs, sn, 0.0],
                }
            }
        }
    }
}

/// Flow velocity in plane coordinates. `radius` carries the conoid slice
/// radius and is unused otherwise.
fn flow_velocity(
    field: &dyn LevelField,
    case_: ChartCase,
    radius: f64,
    p: [f64; 2],
    grad_floor: f64,
) -> Result<[f64; 2]> {
    let g = field.gradient(p)?;
    match case_ {
        ChartCase::Cylinder | ChartCase::Revolution => {
            let gg = g[0] * g[0] + g[1] * g[1];
            if gg.sqrt() < grad_floor {
                return Err(Error::NonRegularLevel(field.value(p)?));
            }
            Ok([g[0] / gg, g[1] / gg])
        }
        ChartCase::Conoid => {
            let gg = g[0] * g[0] / (radius * radius) + g[1] * g[1];
            if gg.sqrt() < grad_floor {
                return Err(Error::NonRegularLevel(field.value(p)?));
            }
            Ok([g[0] / (radius * radius * gg), g[1] / gg])
        }
    }
}

/// chi = 1 / |grad f| in the metric seen by the level surface.
fn chi_at(
    field: &dyn LevelField,
    case_: ChartCase,
    radius: f64,
    p: [f64; 2],
) -> Result<f64> {
    let g = field.gradient(p)?;
    let gg = match case_ {
        ChartCase::Cylinder | ChartCase::Revolution => g[0] * g[0] + g[1] * g[1],
        ChartCase::Conoid => g[0] * g[0] / (radius * radius) + g[1] * g[1],
    };
    Ok(1.0 / gg.sqrt())
}

fn rk4_step(
    field: &dyn LevelField,
    case_: ChartCase,
    radius: f64,
    p: [f64; 2],
    h: f64,
    grad_floor: f64,
) -> Result<[f64; 2]> {
    let v = |q: [f64; 2]| flow_velocity(field, case_, radius, q, grad_floor);
    let k1 = v(p)?;
    let k2 = v([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]])?;
    let k3 = v([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]])?;
    let k4 = v([p[0] + h * k3[0], p[1] + h * k3[1]])?;
    Ok([
        p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Reorder the curve so that (d1 Phi, d2 Phi, dt Phi) is a right-handed
/// frame in space. The sign of the plane cross product tangent x flow is
/// constant along a regular level curve, so one interior sample decides.
fn orient_curve(
    curve: &mut super::LevelCurve,
    field: &dyn LevelField,
    case_: ChartCase,
    radius: f64,
    grad_floor: f64,
) -> Result<()> {
    let pts = &curve.points;
    let n = pts.len();
    let mut cross = 0.0f64;
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let tangent = if curve.closed {
            [next[0] - prev[0], next[1] - prev[1]]
        } else if i == 0 {
            [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]]
        } else {
            [pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]]
        };
        let v = flow_velocity(field, case_, radius, pts[i], grad_floor)?;
        let c = tangent[0] * v[1] - tangent[1] * v[0];
        if c.abs() > cross.abs() {
            cross = c;
        }
    }
    if cross == 0.0 {
        return Err(Error::DegenerateChart(
            "level curve tangent is parallel to the flow".into(),
        ));
    }
    // Unrolling the embeddings, right-handedness of the frame comes down to
    // the sign of tangent x flow in the plane: positive for the surface of
    // revolution, negative for the other two cases.
    let want_positive = case_ == ChartCase::Revolution;
    if (cross > 0.0) != want_positive {
        curve.points.reverse();
    }
    Ok(())
}

/// Extract the level curve of `field` at `level0` and push it along the
/// normalized gradient flow for `params.t_end` units of level.
pub fn evolve_chart(
    field: &dyn LevelField,
    level0: f64,
    params: &ChartParams,
) -> Result<SurfaceChart> {
    if params.nt < 2 {
        return Err(Error::InvalidParameter(
            "chart evolution needs at least two time samples".into(),
        ));
    }
    if params.substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive".into()));
    }
    if params.t_end == 0.0 || !params.t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "evolution time must be finite and nonzero, got {}",
            params.t_end
        )));
    }
    let case_ = field.case();
    let radii: Vec<f64> = match case_ {
        ChartCase::Conoid => {
            let xi2 = params.xi2.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "conoid charts need explicit slice radii in xi2".into(),
                )
            })?;
            if xi2.is_empty() || xi2.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
                return Err(Error::InvalidParameter(
                    "conoid slice radii must be positive and finite".into(),
                ));
            }
            xi2.clone()
        }
        // One slice; the value is never used as a radius.
        _ => vec![f64::NAN],
    };

    let mut curve = extract_level_curve(field, level0, params.n_xi1, params.grad_floor)?;
    orient_curve(&mut curve, field, case_, radii[0], params.grad_floor)?;
    let n1 = curve.points.len();
    let nt = params.nt;
    let ts: Vec<f64> = (0..nt)
        .map(|k| params.t_end * k as f64 / (nt - 1) as f64)
        .collect();
    let dt = ts[1] - ts[0];
    let wrap = if curve.closed { Wrap::Periodic } else { Wrap::Clamped };
    let h1 = if curve.closed {
        std::f64::consts::TAU / n1 as f64
    } else {
        curve.xi1[1] - curve.xi1[0]
    };

    let mut slices = Vec::with_capacity(radii.len());
    let mut level_defect = 0.0f64;
    let mut chi_time_check = 0.0f64;

    for &radius in &radii {
        let mut a = Array2::zeros((n1, nt));
        let mut b = Array2::zeros((n1, nt));
        for (i, &start) in curve.points.iter().enumerate() {
            let mut pos = start;
            a[[i, 0]] = pos[0];
            b[[i, 0]] = pos[1];
            for k in 1..nt {
                let h = dt / params.substeps as f64;
                for _ in 0..params.substeps {
                    pos = rk4_step(field, case_, radius, pos, h, params.grad_floor)?;
                }
                a[[i, k]] = pos[0];
                b[[i, k]] = pos[1];
            }
        }

        let d1a = diff2_axis(&a, 0, h1, wrap);
        let d1b = diff2_axis(&b, 0, h1, wrap);
        let mut dta = Array2::zeros((n1, nt));
        let mut dtb = Array2::zeros((n1, nt));
        let mut chi = Array2::zeros((n1, nt));
        let mut nu = Array2::zeros((n1, nt));
        let mut p = Array2::zeros((n1, nt));
        let mut q = Array2::zeros((n1, nt));

        for i in 0..n1 {
            for k in 0..nt {
                let pt = [a[[i, k]], b[[i, k]]];
                let v = flow_velocity(field, case_, radius, pt, params.grad_floor)?;
                dta[[i, k]] = v[0];
                dtb[[i, k]] = v[1];
                let x = chi_at(field, case_, radius, pt)?;
                let n = match case_ {
                    ChartCase::Cylinder => {
                        (d1a[[i, k]].powi(2) + d1b[[i, k]].powi(2)).sqrt()
                    }
                    ChartCase::Revolution => {
                        if pt[0] <= 0.0 {
                            return Err(Error::DegenerateChart(format!(
                                "chart crossed the axis at t = {}",
                                ts[k]
                            )));
                        }
                        (d1a[[i, k]].powi(2) + d1b[[i, k]].powi(2)).sqrt() / pt[0]
                    }
                    ChartCase::Conoid => {
                        (radius * radius * d1a[[i, k]].powi(2) + d1b[[i, k]].powi(2))
                            .sqrt()
                    }
                };
                if !(x.is_finite() && x > 0.0 && n.is_finite() && n > 0.0) {
                    return Err(Error::DegenerateChart(format!(
                        "chi = {x:.3e}, nu = {n:.3e} at xi1 index {i}, t = {}",
                        ts[k]
                    )));
                }
                chi[[i, k]] = x;
                nu[[i, k]] = n;
                p[[i, k]] = x / n;
                q[[i, k]] = x * n;

                let defect = (field.value(pt)? - (level0 + ts[k])).abs();
                level_defect = level_defect.max(defect);
            }
        }

        // Independent check on chi: the flow map's time derivative, measured
        // in the surface metric, is chi by construction of the flow.
        for i in 0..n1 {
            for k in 1..nt.saturating_sub(1) {
                let fa = (a[[i, k + 1]] - a[[i, k - 1]]) / (2.0 * dt);
                let fb = (b[[i, k + 1]] - b[[i, k - 1]]) / (2.0 * dt);
                let speed = match case_ {
                    ChartCase::Conoid => (radius * radius * fa * fa + fb * fb).sqrt(),
                    _ => (fa * fa + fb * fb).sqrt(),
                };
                chi_time_check =
                    chi_time_check.max((speed - chi[[i, k]]).abs() / chi[[i, k]]);
            }
        }

        slices.push(PlanarSlice {
            a,
            b,
            d1a,
            d1b,
            dta,
            dtb,
            chi,
            nu,
            p,
            q,
        });
    }

    let xi2 = match case_ {
        ChartCase::Conoid => Some(radii),
        _ => params.xi2.clone(),
    };

    Ok(SurfaceChart {
        case_,
        level0,
        closed: curve.closed,
        ts,
        xi1: curve.xi1,
        xi2,
        slices,
        level_defect,
        chi_time_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::AnalyticLevelField;

    #[test]
    fn radial_factor_of_revolution_has_linear_coefficients() {
        // f = r: the flow is unit speed in r, the level curve is a vertical
        // segment, and the coefficients are p = r, q = 1/r exactly.
        let f = AnalyticLevelField {
            case_: ChartCase::Revolution,
            lo: [0.5, -1.0],
            hi: [4.0, 1.0],
            value_fn: |p: [f64; 2]| p[0],
            gradient_fn: |_| [1.0, 0.0],
        };
        let chart = evolve_chart(&f, 1.0, &ChartParams::new(2.0, 33, 9)).unwrap();
        assert!(!chart.closed);
        assert_eq!(chart.slices.len(), 1);
        assert!(chart.level_defect < 1e-12);
        assert!(chart.chi_time_check < 1e-12);
        let sl = &chart.slices[0];
        for i in 0..chart.n_xi1() {
            for k in 0..chart.nt() {
                let r = 1.0 + chart.ts[k];
                assert!((sl.a[[i, k]] - r).abs() < 1e-12);
                assert!((sl.chi[[i, k]] - 1.0).abs() < 1e-12);
                assert!((sl.p[[i, k]] - r).abs() < 1e-9, "p {}", sl.p[[i, k]]);
                assert!((sl.q[[i, k]] - 1.0 / r).abs() < 1e-9);
            }
        }
        // Orientation: the right-handed frame convention runs xi1 down the
        // z axis when the flow points outward in r.
        assert!(sl.d1b[[5, 3]] < 0.0, "d1b {}", sl.d1b[[5, 3]]);
    }

    #[test]
    fn cylindrical_radius_squared_keeps_q_constant() {
        // f = x1^2 + x2^2: levels are circles, r(t) = sqrt(1 + t),
        // chi = 1/(2r), nu = r, so q = 1/2 along the whole chart.
        let f = AnalyticLevelField {
            case_: ChartCase::Cylinder,
            lo: [-3.0, -3.0],
            hi: [3.0, 3.0],
            value_fn: |p: [f64; 2]| p[0] * p[0] + p[1] * p[1],
            gradient_fn: |p: [f64; 2]| [2.0 * p[0], 2.0 * p[1]],
        };
        let chart = evolve_chart(&f, 1.0, &ChartParams::new(3.0, 128, 25).with_substeps(4)).unwrap();
        assert!(chart.closed);
        assert!(chart.level_defect < 1e-8, "defect {}", chart.level_defect);
        let sl = &chart.slices[0];
        for i in 0..chart.n_xi1() {
            for k in 0..chart.nt() {
                let r = (1.0 + chart.ts[k]).sqrt();
                let got_r = (sl.a[[i, k]].powi(2) + sl.b[[i, k]].powi(2)).sqrt();
                assert!((got_r - r).abs() < 1e-8);
                assert!((sl.q[[i, k]] - 0.5).abs() < 1e-3, "q {}", sl.q[[i, k]]);
                assert!((sl.nu[[i, k]] - r).abs() < 1e-3);
            }
        }
        // Centered time differences of the map reproduce chi at O(dt^2).
        assert!(chart.chi_time_check < 2e-3, "chi check {}", chart.chi_time_check);
    }

    #[test]
    fn conoid_slices_scale_with_radius() {
        // f = z: the flow is vertical with unit speed at every radius, the
        // level curve is a horizontal segment, nu = r and chi = 1.
        let f = AnalyticLevelField {
            case_: ChartCase::Conoid,
            lo: [-1.0, -1.0],
            hi: [1.0, 1.0],
            value_fn: |p: [f64; 2]| p[1],
            gradient_fn: |_| [0.0, 1.0],
        };
        let radii = vec![0.5, 1.0, 2.0];
        let params = ChartParams::new(1.0, 17, 5).with_xi2(radii.clone());
        let chart = evolve_chart(&f, -0.5, &params).unwrap();
        assert_eq!(chart.slices.len(), 3);
        for (s, &r) in radii.iter().enumerate() {
            let sl = &chart.slices[s];
            for i in 0..chart.n_xi1() {
                for k in 0..chart.nt() {
                    assert!((sl.b[[i, k]] - (-0.5 + chart.ts[k])).abs() < 1e-12);
                    assert!((sl.chi[[i, k]] - 1.0).abs() < 1e-12);
                    assert!((sl.nu[[i, k]] - r).abs() < 1e-9);
                    assert!((sl.p[[i, k]] - 1.0 / r).abs() < 1e-9);
                    assert!((sl.q[[i, k]] - r).abs() < 1e-9);
                }
            }
        }
        // Frames: tangent2 is the unit radial ray.
        let fr = chart.frame(1, 0, 0, f64::NAN);
        let t2 = fr.tangent2;
        assert!((t2[0] * t2[0] + t2[1] * t2[1] + t2[2] * t2[2] - 1.0).abs() < 1e-12);
        // Missing radii are rejected.
        assert!(evolve_chart(&f, -0.5, &ChartParams::new(1.0, 17, 5)).is_err());
    }

    #[test]
    fn revolution_frame_is_orthogonal() {
        let f = AnalyticLevelField {
            case_: ChartCase::Revolution,
            lo: [0.5, -1.5],
            hi: [3.5, 1.5],
            value_fn: |p: [f64; 2]| (p[0] - 2.0) * (p[0] - 2.0) + p[1] * p[1],
            gradient_fn: |p: [f64; 2]| [2.0 * (p[0] - 2.0), 2.0 * p[1]],
        };
        let chart = evolve_chart(&f, 0.25, &ChartParams::new(0.5, 64, 9)).unwrap();
        assert!(chart.closed);
        for &(i, k) in &[(0usize, 0usize), (13, 4), (40, 8)] {
            let fr = chart.frame(0, i, k, 0.7);
            let dot = fr.tangent1[0] * fr.tangent2[0]
                + fr.tangent1[1] * fr.tangent2[1]
                + fr.tangent1[2] * fr.tangent2[2];
            assert!(dot.abs() < 1e-12, "tangents not orthogonal: {dot}");
            // |t2| = radius of the point.
            let r = (fr.position[0].powi(2) + fr.position[1].powi(2)).sqrt();
            let n2 = (fr.tangent2[0].powi(2) + fr.tangent2[1].powi(2)).sqrt();
            assert!((n2 - r).abs() < 1e-12);
        }
    }
}

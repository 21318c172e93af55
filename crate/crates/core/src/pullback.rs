//! Pullback of a vector field to a level-surface chart, and the constrained
//! evolution of the resulting 1-form across levels.
//!
//! On a chart Phi(xi1, xi2) of the level surface {f = c + t}, the field is
//! represented by the covariant pair beta_i = u . d_i Phi. For a field
//! satisfying both the curl relation and the first integral, the pair obeys
//! a linear transport equation in t,
//!
//! ```text
//! d/dt v = (c + t) chi M(xi1, t) v,
//! ```
//!
//! where M is built either from the case conventions (`EvolutionPath::Case`,
//! using the recorded nu) or from the full metric of the embedding tangents
//! (`EvolutionPath::GenericMetric`). The two agree on orthogonal charts and
//! serve as mutual cross-checks.
//!
//! At any fixed t the pair also satisfies a first-order elliptic system in
//! the chart variables: div (B v) = 0 and the rotated divergence
//! d2 v1 - d1 v2 = 0, with B = diag(p, q) from the chart. Derivatives in
//! xi2 are available for the cylinder and revolution cases, where the chart
//! is a genuine product in the symmetry coordinate; the conoid case is
//! treated slice by slice and xi2 derivatives are omitted there (nodes of
//! neighboring slices do not line up on common rulings once the flow has
//! acted).

use ndarray::{s, Array2, Array3};

use crate::error::{Error, Result};
use crate::levelset::{ChartCase, SurfaceChart};
use crate::ops::{diff2_axis, Wrap};
use crate::vector::SymmetricVectorField;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EvolutionPath {
    /// Transport matrix from the per-case conventions (p, q arrays).
    Case,
    /// Transport matrix assembled from the embedding metric at each node.
    GenericMetric,
}

/// Covariant components of a field on a surface chart, indexed
/// `[xi2 sample, xi1, t]`.
#[derive(Clone, Debug)]
pub struct PullbackForm {
    pub case_: ChartCase,
    /// Free-coordinate sample values, one per row. For the conoid these are
    /// the chart's slice radii.
    pub xi2: Vec<f64>,
    pub beta1: Array3<f64>,
    pub beta2: Array3<f64>,
    /// Max over nodes of |u . n| / max |u|, the relative failure of the
    /// field to be tangent to the level surfaces.
    pub tangency_defect: f64,
}

impl PullbackForm {
    /// Components at one time sample, as `(beta1, beta2)` with rows over
    /// the xi2 samples.
    pub fn at_time(&self, k: usize) -> (Array2<f64>, Array2<f64>) {
        (
            self.beta1.slice(s![.., .., k]).to_owned(),
            self.beta2.slice(s![.., .., k]).to_owned(),
        )
    }
}

/// Transport a 1-form across levels from its value on the seed curve.
#[derive(Clone, Debug)]
pub struct ConstrainedEvolution {
    pub xi2: Vec<f64>,
    pub beta1: Array3<f64>,
    pub beta2: Array3<f64>,
    /// Max-abs of the rotated divergence d2 v1 - d1 v2 at each time sample,
    /// the constraint the transport is supposed to preserve.
    pub drift: Vec<f64>,
}

/// Pull a field back onto a chart. For cylinder and revolution charts,
/// `xi2` lists the symmetry-coordinate samples to evaluate at (at least
/// one); conoid charts carry their slice radii already and `xi2` must be
/// empty. Fails with `TangencyDefect` if the field sticks out of the level
/// surfaces by more than `tangency_tol` relative to its magnitude.
pub fn pullback_form(
    u: &SymmetricVectorField,
    chart: &SurfaceChart,
    xi2: &[f64],
    tangency_tol: f64,
) -> Result<PullbackForm> {
    let conoid = chart.case_ == ChartCase::Conoid;
    let rows: Vec<f64> = if conoid {
        if !xi2.is_empty() {
            return Err(Error::ChartMismatch(
                "conoid charts carry their own slice radii; pass an empty xi2".into(),
            ));
        }
        chart.xi2.clone().expect("conoid charts carry xi2")
    } else {
        if xi2.is_empty() {
            return Err(Error::InvalidParameter(
                "pullback needs at least one xi2 sample".into(),
            ));
        }
        xi2.to_vec()
    };
    let (n2, n1, nt) = (rows.len(), chart.n_xi1(), chart.nt());
    let mut beta1 = Array3::zeros((n2, n1, nt));
    let mut beta2 = Array3::zeros((n2, n1, nt));
    let mut worst_normal = 0.0f64;
    let mut scale = 0.0f64;
    for (s2, &x2) in rows.iter().enumerate() {
        let slice = if conoid { s2 } else { 0 };
        for i in 0..n1 {
            for k in 0..nt {
                let fr = chart.frame(slice, i, k, x2);
                let v = u.eval_cartesian(fr.position)?;
                beta1[[s2, i, k]] = dot(v, fr.tangent1);
                beta2[[s2, i, k]] = dot(v, fr.tangent2);
                let n = normal_direction(chart, slice, i, k, x2);
                let nn = dot(n, n).sqrt();
                if nn > 0.0 {
                    worst_normal = worst_normal.max(dot(v, n).abs() / nn);
                }
                scale = scale.max(dot(v, v).sqrt());
            }
        }
    }
    let tangency_defect = worst_normal / scale.max(f64::MIN_POSITIVE);
    if tangency_defect > tangency_tol {
        return Err(Error::TangencyDefect {
            defect: tangency_defect,
            tol: tangency_tol,
        });
    }
    Ok(PullbackForm {
        case_: chart.case_,
        xi2: rows,
        beta1,
        beta2,
        tangency_defect,
    })
}

/// The level-surface normal direction (unnormalized): the embedding of the
/// flow velocity, which points along grad f.
fn normal_direction(chart: &SurfaceChart, s: usize, i: usize, k: usize, xi2: f64) -> [f64; 3] {
    let sl = &chart.slices[s];
    let (dta, dtb) = (sl.dta[[i, k]], sl.dtb[[i, k]]);
    match chart.case_ {
        ChartCase::Cylinder => [dta, dtb, 0.0],
        ChartCase::Revolution => {
            let (cs, sn) = (xi2.cos(), xi2.sin());
            [dta * cs, dta * sn, dtb]
        }
        ChartCase::Conoid => {
            let r = chart.xi2.as_ref().expect("conoid charts carry xi2")[s];
            let a = sl.a[[i, k]];
            [-r * a.sin() * dta, r * a.cos() * dta, dtb]
        }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Entries of the transport matrix M at every chart node of one slice,
/// without the common (c + t) chi factor folded in by the Case path or the
/// equivalent scaling of the metric path. Returned as four (n1, nt) arrays
/// (m11, m12, m21, m22) such that d/dt v = (c + t) M v.
fn transport_entries(
    chart: &SurfaceChart,
    slice: usize,
    path: EvolutionPath,
) -> Result<[Array2<f64>; 4]> {
    let (n1, nt) = (chart.n_xi1(), chart.nt());
    let sl = &chart.slices[slice];
    let mut m11 = Array2::zeros((n1, nt));
    let mut m12 = Array2::zeros((n1, nt));
    let mut m21 = Array2::zeros((n1, nt));
    let mut m22 = Array2::zeros((n1, nt));
    for i in 0..n1 {
        for k in 0..nt {
            match path {
                EvolutionPath::Case => {
                    m12[[i, k]] = sl.q[[i, k]];
                    m21[[i, k]] = -sl.p[[i, k]];
                }
                EvolutionPath::GenericMetric => {
                    let fr = chart.frame(slice, i, k, 0.0);
                    let g11 = dot(fr.tangent1, fr.tangent1);
                    let g12 = dot(fr.tangent1, fr.tangent2);
                    let g22 = dot(fr.tangent2, fr.tangent2);
                    let det = g11 * g22 - g12 * g12;
                    if !(det.is_finite() && det > 0.0) {
                        return Err(Error::DegenerateChart(format!(
                            "metric determinant {det:.3e} at xi1 index {i}, time index {k}"
                        )));
                    }
                    let w = sl.chi[[i, k]] * det.sqrt();
                    let (iu11, iu12, iu22) = (g22 / det, -g12 / det, g11 / det);
                    m11[[i, k]] = w * iu12;
                    m12[[i, k]] = w * iu22;
                    m21[[i, k]] = -w * iu11;
                    m22[[i, k]] = -w * iu12;
                }
            }
        }
    }
    Ok([m11, m12, m21, m22])
}

/// Integrate the transport equation from initial components on the seed
/// curve. `beta1_0` and `beta2_0` are (n2, n1) with rows over xi2 samples;
/// `xi2` carries the row coordinates (ignored, and allowed empty, for
/// conoid charts whose rows are the chart slices). RK4 with `substeps`
/// steps per chart time interval and matrix entries interpolated linearly
/// in t between chart samples.
pub fn evolve_constrained(
    beta1_0: &Array2<f64>,
    beta2_0: &Array2<f64>,
    xi2: &[f64],
    chart: &SurfaceChart,
    path: EvolutionPath,
    substeps: usize,
) -> Result<ConstrainedEvolution> {
    let (n2, n1) = beta1_0.dim();
    if beta2_0.dim() != (n2, n1) {
        return Err(Error::IncompatibleGrids(
            "initial component arrays differ in shape".into(),
        ));
    }
    if n1 != chart.n_xi1() {
        return Err(Error::ChartMismatch(format!(
            "initial data has {} xi1 samples, chart has {}",
            n1,
            chart.n_xi1()
        )));
    }
    let conoid = chart.case_ == ChartCase::Conoid;
    if conoid && n2 != chart.slices.len() {
        return Err(Error::ChartMismatch(format!(
            "conoid evolution needs one row per slice: {} rows, {} slices",
            n2,
            chart.slices.len()
        )));
    }
    if !conoid && xi2.len() != n2 {
        return Err(Error::InvalidParameter(format!(
            "xi2 carries {} coordinates for {} rows",
            xi2.len(),
            n2
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive".into()));
    }
    let nt = chart.nt();
    let dt = chart.dt();
    let c = chart.level0;
    let mut beta1 = Array3::zeros((n2, n1, nt));
    let mut beta2 = Array3::zeros((n2, n1, nt));

    let mut entries: Vec<[Array2<f64>; 4]> = Vec::new();
    for slice in 0..chart.slices.len() {
        entries.push(transport_entries(chart, slice, path)?);
    }

    for s2 in 0..n2 {
        let m = &entries[if conoid { s2 } else { 0 }];
        for i in 0..n1 {
            let mut v = [beta1_0[[s2, i]], beta2_0[[s2, i]]];
            beta1[[s2, i, 0]] = v[0];
            beta2[[s2, i, 0]] = v[1];
            for k in 0..nt - 1 {
                let at = |theta: f64| -> [f64; 4] {
                    let lerp = |a: &Array2<f64>| {
                        (1.0 - theta) * a[[i, k]] + theta * a[[i, k + 1]]
                    };
                    [lerp(&m[0]), lerp(&m[1]), lerp(&m[2]), lerp(&m[3])]
                };
                let h = dt / substeps as f64;
                for j in 0..substeps {
                    let t0 = chart.ts[k] + j as f64 * h;
                    let rhs = |t: f64, w: [f64; 2]| -> [f64; 2] {
                        let e = at((t - chart.ts[k]) / dt);
                        let f = c + t;
                        [
                            f * (e[0] * w[0] + e[1] * w[1]),
                            f * (e[2] * w[0] + e[3] * w[1]),
                        ]
                    };
                    let k1 = rhs(t0, v);
                    let k2 = rhs(
                        t0 + 0.5 * h,
                        [v[0] + 0.5 * h * k1[0], v[1] + 0.5 * h * k1[1]],
                    );
                    let k3 = rhs(
                        t0 + 0.5 * h,
                        [v[0] + 0.5 * h * k2[0], v[1] + 0.5 * h * k2[1]],
                    );
                    let k4 = rhs(t0 + h, [v[0] + h * k3[0], v[1] + h * k3[1]]);
                    v = [
                        v[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                        v[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                    ];
                }
                beta1[[s2, i, k + 1]] = v[0];
                beta2[[s2, i, k + 1]] = v[1];
            }
        }
    }

    let h2 = cross_row_spacing(chart.case_, xi2);
    let mut drift = Vec::with_capacity(nt);
    for k in 0..nt {
        let b1 = beta1.slice(s![.., .., k]).to_owned();
        let b2 = beta2.slice(s![.., .., k]).to_owned();
        drift.push(rotated_divergence(&b1, &b2, chart, h2).1);
    }

    Ok(ConstrainedEvolution {
        xi2: xi2.to_vec(),
        beta1,
        beta2,
        drift,
    })
}

/// Uniform spacing of the xi2 rows, when cross-row derivatives make sense:
/// never for the conoid, and only for at least two uniformly spaced rows
/// otherwise.
fn cross_row_spacing(case_: ChartCase, xi2: &[f64]) -> Option<f64> {
    if case_ == ChartCase::Conoid || xi2.len() < 2 {
        return None;
    }
    let h = xi2[1] - xi2[0];
    if h <= 0.0 {
        return None;
    }
    for w in xi2.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return None;
        }
    }
    Some(h)
}

/// d2 v1 - d1 v2 on the (xi2, xi1) grid of one time sample; returns the
/// defect array and its max-abs. Rows are differenced only when `h2` is
/// given; xi1 differencing wraps on closed charts.
fn rotated_divergence(
    b1: &Array2<f64>,
    b2: &Array2<f64>,
    chart: &SurfaceChart,
    h2: Option<f64>,
) -> (Array2<f64>, f64) {
    let wrap1 = if chart.closed { Wrap::Periodic } else { Wrap::Clamped };
    let d1b2 = diff2_axis(b2, 1, chart.h1(), wrap1);
    let defect = match h2 {
        Some(h) => diff2_axis(b1, 0, h, Wrap::Clamped) - &d1b2,
        None => -d1b2,
    };
    let max = defect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (defect, max)
}

/// Residuals of the first-order elliptic system at one time sample.
#[derive(Clone, Copy, Debug)]
pub struct EllipticResiduals {
    /// Max-abs of div (B v) = d1 (p v1) + d2 (q v2).
    pub div_b: f64,
    /// Max-abs of the rotated divergence d2 v1 - d1 v2.
    pub curl: f64,
    /// Max-abs of div (B grad v2), the decoupled second-order equation the
    /// second component satisfies in the cylinder and revolution cases.
    pub v2_flux: Option<f64>,
}

pub fn elliptic_residuals(
    form: &PullbackForm,
    chart: &SurfaceChart,
    k: usize,
    include_v2: bool,
) -> Result<EllipticResiduals> {
    if k >= chart.nt() {
        return Err(Error::InvalidParameter(format!(
            "time index {} out of {}",
            k,
            chart.nt()
        )));
    }
    let conoid = chart.case_ == ChartCase::Conoid;
    if include_v2 && conoid {
        return Err(Error::UnsupportedCase(
            "the decoupled second-component equation lives on product charts only".into(),
        ));
    }
    let (b1, b2) = form.at_time(k);
    let (n2, n1) = b1.dim();
    let h1 = chart.h1();
    let wrap1 = if chart.closed { Wrap::Periodic } else { Wrap::Clamped };
    let h2 = cross_row_spacing(chart.case_, &form.xi2);

    // d1 (p v1) + d2 (q v2) with the diagonal coefficients from the chart.
    let mut pv1 = Array2::zeros((n2, n1));
    let mut qv2 = Array2::zeros((n2, n1));
    for s2 in 0..n2 {
        let sl = &chart.slices[if conoid { s2 } else { 0 }];
        for i in 0..n1 {
            pv1[[s2, i]] = sl.p[[i, k]] * b1[[s2, i]];
            qv2[[s2, i]] = sl.q[[i, k]] * b2[[s2, i]];
        }
    }
    let mut div = diff2_axis(&pv1, 1, h1, wrap1);
    if let Some(h) = h2 {
        div += &diff2_axis(&qv2, 0, h, Wrap::Clamped);
    }
    let div_b = max_abs_interior(&div, h2.is_some(), wrap1 == Wrap::Clamped);

    let (curl_arr, _) = rotated_divergence(&b1, &b2, chart, h2);
    let curl = max_abs_interior(&curl_arr, h2.is_some(), wrap1 == Wrap::Clamped);

    let v2_flux = if include_v2 {
        let d1 = diff2_axis(&b2, 1, h1, wrap1);
        let mut pd1 = Array2::zeros((n2, n1));
        for s2 in 0..n2 {
            let sl = &chart.slices[0];
            for i in 0..n1 {
                pd1[[s2, i]] = sl.p[[i, k]] * d1[[s2, i]];
            }
        }
        let mut flux = diff2_axis(&pd1, 1, h1, wrap1);
        if let Some(h) = h2 {
            let d2 = diff2_axis(&b2, 0, h, Wrap::Clamped);
            let mut qd2 = Array2::zeros((n2, n1));
            for s2 in 0..n2 {
                let sl = &chart.slices[0];
                for i in 0..n1 {
                    qd2[[s2, i]] = sl.q[[i, k]] * d2[[s2, i]];
                }
            }
            flux += &diff2_axis(&qd2, 0, h, Wrap::Clamped);
        }
        Some(max_abs_interior(&flux, h2.is_some(), wrap1 == Wrap::Clamped))
    } else {
        None
    };

    Ok(EllipticResiduals { div_b, curl, v2_flux })
}

/// Max-abs skipping one boundary layer along axes where one-sided stencils
/// were used (first-derivative one-sided edges are second order but the
/// composed second-difference edges are not).
fn max_abs_interior(a: &Array2<f64>, skip_rows: bool, skip_cols: bool) -> f64 {
    let (n2, n1) = a.dim();
    let (r0, r1) = if skip_rows && n2 > 2 { (1, n2 - 1) } else { (0, n2) };
    let (c0, c1) = if skip_cols && n1 > 2 { (1, n1 - 1) } else { (0, n1) };
    let mut m = 0.0f64;
    for s2 in r0..r1 {
        for i in c0..c1 {
            m = m.max(a[[s2, i]].abs());
        }
    }
    m
}

/// Weighted Dirichlet energy of a scalar on a doubly periodic (xi2, xi1)
/// grid: sum of p (d1 w)^2 + q (d2 w)^2 over nodes times the cell area.
/// The coefficient vectors are indexed by xi1 and constant along xi2.
pub fn dirichlet_energy(w: &Array2<f64>, p: &[f64], q: &[f64], h1: f64, h2: f64) -> Result<f64> {
    let (n2, n1) = w.dim();
    if p.len() != n1 || q.len() != n1 {
        return Err(Error::IncompatibleGrids(format!(
            "coefficient vectors of length {}, {} against {} xi1 samples",
            p.len(),
            q.len(),
            n1
        )));
    }
    if h1 <= 0.0 || h2 <= 0.0 {
        return Err(Error::InvalidParameter("cell sizes must be positive".into()));
    }
    let d1 = diff2_axis(w, 1, h1, Wrap::Periodic);
    let d2 = diff2_axis(w, 0, h2, Wrap::Periodic);
    let mut e = 0.0;
    for s2 in 0..n2 {
        for i in 0..n1 {
            e += (p[i] * d1[[s2, i]].powi(2) + q[i] * d2[[s2, i]].powi(2)) * h1 * h2;
        }
    }
    Ok(e)
}

//! Rigidity diagnostics: how close a pulled-back field is to the symmetric
//! normal form, and how overdetermined the joint constraint systems are.
//!
//! For a field tangent to the level surfaces of its factor and satisfying
//! the curl relation, the chart components collapse: the second component
//! depends on the level alone, and the first is independent of the free
//! symmetry coordinate. `prop31_diagnostic` measures the failure of that
//! collapse; `reconstruct_from_form` inverts the pullback on the chart
//! nodes so round trips can be checked; `compatibility_rank` computes the
//! discrete nullspace dimension of model constraint systems; and
//! `symmetry_defect` measures invariance of a field under a rigid motion
//! directly in space.

use nalgebra::DMatrix;
use ndarray::s;

use crate::chart::GridSpec3;
use crate::error::{Error, Result};
use crate::levelset::{ChartCase, SurfaceChart};
use crate::pullback::PullbackForm;
use crate::vector::SymmetricVectorField;

/// Normalized variation of the chart components across the directions the
/// normal form forbids. Each entry is a max over all time samples of the
/// component spread divided by the component's overall magnitude.
#[derive(Clone, Copy, Debug)]
pub struct NormalFormDefect {
    /// Spread of the second component along the level curve.
    pub beta2_over_xi1: f64,
    /// Spread of the first component across the symmetry coordinate.
    /// `None` on conoid charts, whose rows are independently parametrized
    /// slices rather than samples of one product chart.
    pub beta1_over_xi2: Option<f64>,
    /// Spread of the second component across the symmetry coordinate.
    pub beta2_over_xi2: Option<f64>,
    /// Magnitude scales used for normalization.
    pub scale1: f64,
    pub scale2: f64,
}

pub fn prop31_diagnostic(form: &PullbackForm) -> NormalFormDefect {
    let (n2, n1, nt) = form.beta1.dim();
    let scale1 = form
        .beta1
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let scale2 = form
        .beta2
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    let mut beta2_over_xi1 = 0.0f64;
    for s2 in 0..n2 {
        for k in 0..nt {
            let row = form.beta2.slice(s![s2, .., k]);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in row.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            beta2_over_xi1 = beta2_over_xi1.max((hi - lo) / scale2);
        }
    }

    let (beta1_over_xi2, beta2_over_xi2) = if form.case_ == ChartCase::Conoid || n2 < 2 {
        (None, None)
    } else {
        let mut d1 = 0.0f64;
        let mut d2 = 0.0f64;
        for i in 0..n1 {
            for k in 0..nt {
                let col1 = form.beta1.slice(s![.., i, k]);
                let col2 = form.beta2.slice(s![.., i, k]);
                let spread = |col: ndarray::ArrayView1<f64>| {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &v in col.iter() {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    hi - lo
                };
                d1 = d1.max(spread(col1) / scale1);
                d2 = d2.max(spread(col2) / scale2);
            }
        }
        (Some(d1), Some(d2))
    };

    NormalFormDefect {
        beta2_over_xi1,
        beta1_over_xi2,
        beta2_over_xi2,
        scale1,
        scale2,
    }
}

/// Field samples on chart nodes, flattened in (xi2 row, xi1, t) order.
#[derive(Clone, Debug)]
pub struct ChartSamples {
    pub shape: (usize, usize, usize),
    pub positions: Vec<[f64; 3]>,
    pub vectors: Vec<[f64; 3]>,
}

/// Invert the pullback on the chart nodes: with orthogonal tangents, the
/// tangential part of the field is
/// beta1 d1Phi / |d1Phi|^2 + beta2 d2Phi / |d2Phi|^2.
pub fn reconstruct_from_form(form: &PullbackForm, chart: &SurfaceChart) -> Result<ChartSamples> {
    let (n2, n1, nt) = form.beta1.dim();
    if n1 != chart.n_xi1() || nt != chart.nt() {
        return Err(Error::ChartMismatch(format!(
            "form is {n1} x {nt} in (xi1, t), chart is {} x {}",
            chart.n_xi1(),
            chart.nt()
        )));
    }
    let conoid = chart.case_ == ChartCase::Conoid;
    let mut positions = Vec::with_capacity(n2 * n1 * nt);
    let mut vectors = Vec::with_capacity(n2 * n1 * nt);
    for s2 in 0..n2 {
        let slice = if conoid { s2 } else { 0 };
        for i in 0..n1 {
            for k in 0..nt {
                let fr = chart.frame(slice, i, k, form.xi2[s2]);
                let n1sq = dot(fr.tangent1, fr.tangent1);
                let n2sq = dot(fr.tangent2, fr.tangent2);
                if n1sq <= 0.0 || n2sq <= 0.0 {
                    return Err(Error::DegenerateChart(format!(
                        "vanishing tangent at xi1 index {i}, time index {k}"
                    )));
                }
                let c1 = form.beta1[[s2, i, k]] / n1sq;
                let c2 = form.beta2[[s2, i, k]] / n2sq;
                positions.push(fr.position);
                vectors.push([
                    c1 * fr.tangent1[0] + c2 * fr.tangent2[0],
                    c1 * fr.tangent1[1] + c2 * fr.tangent2[1],
                    c1 * fr.tangent1[2] + c2 * fr.tangent2[2],
                ]);
            }
        }
    }
    Ok(ChartSamples {
        shape: (n2, n1, nt),
        positions,
        vectors,
    })
}

/// Max relative error between a field and the reconstruction from its own
/// pullback, over the chart nodes. Small for fields tangent to the level
/// surfaces; the tangency defect is exactly what reconstruction loses.
pub fn reconstruction_error(
    u: &SymmetricVectorField,
    form: &PullbackForm,
    chart: &SurfaceChart,
) -> Result<f64> {
    let recon = reconstruct_from_form(form, chart)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (pos, rec) in recon.positions.iter().zip(&recon.vectors) {
        let v = u.eval_cartesian(*pos)?;
        let d = [v[0] - rec[0], v[1] - rec[1], v[2] - rec[2]];
        worst = worst.max(dot(d, d).sqrt());
        scale = scale.max(dot(v, v).sqrt());
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Model constraint systems whose discrete nullspace dimension is the
/// rigidity headline: how many 1-form degrees of freedom survive the
/// constraints together with their time derivatives along the transport,
/// frozen at the seed level on a doubly periodic chart patch.
#[derive(Clone, Copy, Debug)]
pub enum CompatibilitySystem {
    /// Radial factor on the cylinder chart (angle, height) at unit level:
    /// p = 1/r and q = r freeze to 1 with rates (-1, +1), and the rows are
    /// the flux constraint, its time derivative along the transport, and
    /// the rotated divergence. Nullspace is exactly the constants
    /// (dimension 2).
    RadialFactor,
    /// Same chart, but with the flux constraint rescaled by 1/p before
    /// differentiating; the derivative row changes while the conclusion
    /// must not (dimension 2).
    RadialFactorScaled,
    /// Angular factor on the half-plane chart (height, radius), with the
    /// radius entering the coefficients: the flux constraint and its first
    /// two time derivatives along the transport, plus the rotated
    /// divergence. One derivative is not enough: the field (0, 1/r) stays
    /// inside the first three constraints and only breaks the flux at
    /// second order in t, so the cascade is carried to the row
    /// div(r^3 v). No nonzero solutions survive (dimension 0).
    AngularFactor { r0: f64 },
    /// The rotated divergence alone, as a control: one degree of freedom
    /// per nonzero mode plus two constants (dimension n^2 + 1).
    RotatedDivergenceOnly,
}

#[derive(Clone, Debug)]
pub struct RankReport {
    pub n: usize,
    /// Number of singular values at or below the threshold.
    pub dim: usize,
    pub threshold: f64,
    /// All singular values, ascending.
    pub singular_values: Vec<f64>,
}

/// Assemble the chosen system on an n x n doubly periodic grid with
/// forward differences (centered stencils have spurious checkerboard
/// kernels on even grids) and count the singular values below
/// `threshold_coef * h^2`.
pub fn compatibility_rank(
    system: CompatibilitySystem,
    n: usize,
    threshold_coef: f64,
) -> Result<RankReport> {
    if n < 4 {
        return Err(Error::GridTooSmall(format!("{n} x {n} compatibility grid")));
    }
    if threshold_coef <= 0.0 {
        return Err(Error::InvalidParameter(
            "threshold coefficient must be positive".into(),
        ));
    }
    let h = std::f64::consts::TAU / n as f64;
    let nn = n * n;
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);

    // A row set is built from forward-difference actions on the two
    // component blocks: for each node, coeff * (x[shifted] - x[node]) / h,
    // plus optional zeroth-order coefficients.
    let rows = match system {
        CompatibilitySystem::RadialFactor | CompatibilitySystem::RadialFactorScaled => 3 * nn,
        CompatibilitySystem::AngularFactor { .. } => 4 * nn,
        CompatibilitySystem::RotatedDivergenceOnly => nn,
    };
    let mut m = DMatrix::<f64>::zeros(rows, 2 * nn);

    // Forward difference of component `block` at node (i, j) along `axis`,
    // scaled by `w`, accumulated into row `r`.
    let add_diff = |m: &mut DMatrix<f64>, r: usize, block: usize, i: usize, j: usize, axis: usize, w: f64| {
        let (i2, j2) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
        m[(r, block * nn + idx(i2, j2))] += w / h;
        m[(r, block * nn + idx(i, j))] -= w / h;
    };

    match system {
        CompatibilitySystem::RadialFactor => {
            // Cylinder chart by angle and height at unit level and time
            // zero: p = 1/r and q = r freeze to 1 with dp/dt = -1 and
            // dq/dt = +1, and the transport contributes dv/dt = (v2, -v1).
            for i in 0..n {
                for j in 0..n {
                    let r0 = idx(i, j);
                    let r1 = nn + idx(i, j);
                    let r2 = 2 * nn + idx(i, j);
                    // div (B v) = d1 v1 + d2 v2.
                    add_diff(&mut m, r0, 0, i, j, 0, 1.0);
                    add_diff(&mut m, r0, 1, i, j, 1, 1.0);
                    // d/dt of the same:
                    // d1 (dp v1 + p v2') + d2 (dq v2 + q v2')
                    //   = d1 (-v1 + v2) + d2 (v2 - v1).
                    add_diff(&mut m, r1, 0, i, j, 0, -1.0);
                    add_diff(&mut m, r1, 1, i, j, 0, 1.0);
                    add_diff(&mut m, r1, 1, i, j, 1, 1.0);
                    add_diff(&mut m, r1, 0, i, j, 1, -1.0);
                    // Rotated divergence d2 v1 - d1 v2.
                    add_diff(&mut m, r2, 0, i, j, 1, 1.0);
                    add_diff(&mut m, r2, 1, i, j, 0, -1.0);
                }
            }
        }
        CompatibilitySystem::RadialFactorScaled => {
            // Same chart, but the flux constraint is rescaled by 1/p
            // before freezing: the matrix becomes diag(1, q/p) with rates
            // (0, 2), so the derivative row is d1 v2 + d2 (2 v2 - v1).
            for i in 0..n {
                for j in 0..n {
                    let r0 = idx(i, j);
                    let r1 = nn + idx(i, j);
                    let r2 = 2 * nn + idx(i, j);
                    add_diff(&mut m, r0, 0, i, j, 0, 1.0);
                    add_diff(&mut m, r0, 1, i, j, 1, 1.0);
                    add_diff(&mut m, r1, 1, i, j, 0, 1.0);
                    add_diff(&mut m, r1, 1, i, j, 1, 2.0);
                    add_diff(&mut m, r1, 0, i, j, 1, -1.0);
                    add_diff(&mut m, r2, 0, i, j, 1, 1.0);
                    add_diff(&mut m, r2, 1, i, j, 0, -1.0);
                }
            }
        }
        CompatibilitySystem::AngularFactor { r0 } => {
            if r0 <= 0.0 {
                return Err(Error::InvalidParameter(
                    "the radial coefficient needs a positive start".into(),
                ));
            }
            // The radius is the second coordinate: r_j = r0 + j h. The
            // variable coefficient sits inside the differences, so the
            // derivative rows act on (r v), (r^2 v_perp), and (r^3 v).
            let rad = |j: usize| r0 + (j % n) as f64 * h;
            let add_weighted = |m: &mut DMatrix<f64>,
                                    r: usize,
                                    block: usize,
                                    i: usize,
                                    j: usize,
                                    axis: usize,
                                    w: f64,
                                    pow: i32| {
                let (i2, j2) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
                m[(r, block * nn + idx(i2, j2))] += w * rad(j2).powi(pow) / h;
                m[(r, block * nn + idx(i, j))] -= w * rad(j).powi(pow) / h;
            };
            for i in 0..n {
                for j in 0..n {
                    let r0r = idx(i, j);
                    let r1 = nn + idx(i, j);
                    let r2 = 2 * nn + idx(i, j);
                    let r3 = 3 * nn + idx(i, j);
                    // div (r v) = d1 (r v1) + d2 (r v2).
                    add_weighted(&mut m, r0r, 0, i, j, 0, 1.0, 1);
                    add_weighted(&mut m, r0r, 1, i, j, 1, 1.0, 1);
                    // div (r^2 v_perp) = d1 (-r^2 v2) + d2 (r^2 v1).
                    add_weighted(&mut m, r1, 1, i, j, 0, -1.0, 2);
                    add_weighted(&mut m, r1, 0, i, j, 1, 1.0, 2);
                    // div (r^3 v) = d1 (r^3 v1) + d2 (r^3 v2).
                    add_weighted(&mut m, r2, 0, i, j, 0, 1.0, 3);
                    add_weighted(&mut m, r2, 1, i, j, 1, 1.0, 3);
                    // Rotated divergence.
                    add_diff(&mut m, r3, 0, i, j, 1, 1.0);
                    add_diff(&mut m, r3, 1, i, j, 0, -1.0);
                }
            }
        }
        CompatibilitySystem::RotatedDivergenceOnly => {
            for i in 0..n {
                for j in 0..n {
                    let r = idx(i, j);
                    add_diff(&mut m, r, 0, i, j, 1, 1.0);
                    add_diff(&mut m, r, 1, i, j, 0, -1.0);
                }
            }
        }
    }

    let svd = nalgebra::linalg::SVD::new(m, false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| a.total_cmp(b));
    if singular_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure(
            "singular value decomposition produced non-finite values".into(),
        ));
    }
    // Nullity through the rank: a wide system has fewer singular values
    // than columns, so counting the small ones alone would undercount.
    let threshold = threshold_coef * h * h;
    let rank = singular_values.iter().filter(|&&v| v > threshold).count();
    let dim = 2 * nn - rank;
    Ok(RankReport {
        n,
        dim,
        threshold,
        singular_values,
    })
}

/// Rigid motions about or along the vertical axis.
#[derive(Clone, Copy, Debug)]
pub enum SymmetryMotion {
    TranslationZ { shift: f64 },
    RotationZ { angle: f64 },
}

/// Max relative defect of equivariance under the motion, probed on the
/// nodes of `probes`: |u(T x) - T u(x)| over points where both x and T x
/// are inside the field's domain.
pub fn symmetry_defect(
    u: &SymmetricVectorField,
    motion: SymmetryMotion,
    probes: &GridSpec3,
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut valid = 0usize;
    for i in 0..probes.shape[0] {
        for j in 0..probes.shape[1] {
            for k in 0..probes.shape[2] {
                let x = probes.coord(i, j, k);
                let (y, rot) = match motion {
                    SymmetryMotion::TranslationZ { shift } => {
                        ([x[0], x[1], x[2] + shift], None)
                    }
                    SymmetryMotion::RotationZ { angle } => {
                        let (cs, sn) = (angle.cos(), angle.sin());
                        ([cs * x[0] - sn * x[1], sn * x[0] + cs * x[1], x[2]], Some((cs, sn)))
                    }
                };
                let vx = match u.eval_cartesian(x) {
                    Ok(v) => v,
                    Err(Error::OutsideGrid(..)) | Err(Error::ProfileDomain { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let vy = match u.eval_cartesian(y) {
                    Ok(v) => v,
                    Err(Error::OutsideGrid(..)) | Err(Error::ProfileDomain { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let tx = match rot {
                    None => vx,
                    Some((cs, sn)) => [cs * vx[0] - sn * vx[1], sn * vx[0] + cs * vx[1], vx[2]],
                };
                let d = [vy[0] - tx[0], vy[1] - tx[1], vy[2] - tx[2]];
                worst = worst.max(dot(d, d).sqrt());
                scale = scale.max(dot(vx, vx).sqrt());
                valid += 1;
            }
        }
    }
    if valid == 0 {
        return Err(Error::Validation(
            "no probe point stayed inside the field domain under the motion".into(),
        ));
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

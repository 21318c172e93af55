//! Level-set geometry of the proportionality factor.
//!
//! A factor with a one-dimensional symmetry depends on two of the three
//! cylindrical coordinates, and its level sets fall into three chart cases:
//!
//! * `Cylinder`: f = f(x1, x2), levels are cylinders over planar curves,
//!   the free chart coordinate is x3;
//! * `Revolution`: f = f(r, z), levels are surfaces of revolution over
//!   meridional curves, the free coordinate is the angle;
//! * `Conoid`: f = f(theta, z), levels are ruled surfaces swept along
//!   radial rays, the free coordinate is the radius and every chart
//!   quantity depends on it slice by slice.
//!
//! `extract_level_curve` locates one level curve in the reduced plane
//! (marching squares, Newton-refined onto the level set, arc-length
//! resampled); `evolve_chart` in the `chart` submodule pushes it along the
//! normalized gradient flow of f.

pub mod chart;
pub mod marching;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartTag, ScalarChartField};
use crate::error::{Error, Result};
use crate::ops::{diff2_axis, Wrap};

pub use chart::{evolve_chart, ChartParams, PlanarSlice, SurfaceChart};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartCase {
    Cylinder,
    Revolution,
    Conoid,
}

impl ChartCase {
    pub fn from_tag(tag: ChartTag) -> Result<Self> {
        match tag {
            ChartTag::CartesianXy => Ok(ChartCase::Cylinder),
            ChartTag::MeridionalRz => Ok(ChartCase::Revolution),
            ChartTag::ThetaZ => Ok(ChartCase::Conoid),
            ChartTag::Full3d => Err(Error::UnsupportedCase(
                "level-set charts need a factor with a one-dimensional symmetry".into(),
            )),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChartCase::Cylinder => "cylinder",
            ChartCase::Revolution => "revolution",
            ChartCase::Conoid => "conoid",
        }
    }
}

/// A scalar factor on the reduced plane, with enough structure to flow its
/// level sets: values, gradients, and a bounding box.
pub trait LevelField {
    fn case(&self) -> ChartCase;
    fn value(&self, p: [f64; 2]) -> Result<f64>;
    fn gradient(&self, p: [f64; 2]) -> Result<[f64; 2]>;
    /// Inclusive bounds of the reduced plane region the field is defined on.
    fn bounds(&self) -> ([f64; 2], [f64; 2]);
}

/// Grid-backed factor: bilinear values, gradients interpolated bilinearly
/// from node-wise second-order difference stencils. The "level set" this
/// represents is the level set of the interpolated model, accurate to
/// O(h^2) against the underlying smooth field.
pub struct GriddedLevelField {
    field: ScalarChartField,
    grad1: ScalarChartField,
    grad2: ScalarChartField,
    case_: ChartCase,
}

impl GriddedLevelField {
    pub fn new(field: ScalarChartField) -> Result<Self> {
        let case_ = ChartCase::from_tag(field.chart)?;
        let g1 = diff2_axis(&field.values, 0, field.spacing[0], Wrap::Clamped);
        let g2 = diff2_axis(&field.values, 1, field.spacing[1], Wrap::Clamped);
        let mk = |vals: Array2<f64>, name: &str| {
            ScalarChartField::new(field.chart, field.origin, field.spacing, vals, name)
        };
        let grad1 = mk(g1, "grad1")?;
        let grad2 = mk(g2, "grad2")?;
        Ok(Self {
            field,
            grad1,
            grad2,
            case_,
        })
    }

    pub fn inner(&self) -> &ScalarChartField {
        &self.field
    }
}

impl LevelField for GriddedLevelField {
    fn case(&self) -> ChartCase {
        self.case_
    }

    fn value(&self, p: [f64; 2]) -> Result<f64> {
        self.field.bilinear(p)
    }

    fn gradient(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok([self.grad1.bilinear(p)?, self.grad2.bilinear(p)?])
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.field.origin, self.field.axis_max())
    }
}

/// Closed-form factor for chart studies that need more accuracy than a grid
/// model can deliver.
pub struct AnalyticLevelField<F, G>
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    pub case_: ChartCase,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub value_fn: F,
    pub gradient_fn: G,
}

impl<F, G> LevelField for AnalyticLevelField<F, G>
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    fn case(&self) -> ChartCase {
        self.case_
    }

    fn value(&self, p: [f64; 2]) -> Result<f64> {
        Ok((self.value_fn)(p))
    }

    fn gradient(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok((self.gradient_fn)(p))
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.lo, self.hi)
    }
}

/// One level curve in the reduced plane, arc-length parametrized.
#[derive(Clone, Debug)]
pub struct LevelCurve {
    pub case_: ChartCase,
    pub level: f64,
    pub closed: bool,
    /// Chart coordinate of each sample: `2 pi s / L` on a closed curve,
    /// the arc length s itself on an open one.
    pub xi1: Vec<f64>,
    /// Sample points in the reduced plane.
    pub points: Vec<[f64; 2]>,
    /// Curve length in plane coordinates.
    pub length: f64,
    /// Number of connected components the extraction found (the longest
    /// one is returned).
    pub components: usize,
}

/// Number of nodes per axis used to seed extraction from analytic fields.
const SEED_GRID: usize = 257;

/// Locate the level curve of `f` at `level` and resample it to `n_samples`
/// points uniformly spaced in arc length. Points are Newton-refined onto
/// the level set; gradients smaller than `grad_floor` anywhere on the curve
/// are rejected as non-regular.
pub fn extract_level_curve(
    f: &dyn LevelField,
    level: f64,
    n_samples: usize,
    grad_floor: f64,
) -> Result<LevelCurve> {
    if n_samples < 8 {
        return Err(Error::InvalidParameter(format!(
            "level curves need at least 8 samples, got {}",
            n_samples
        )));
    }
    let (lo, hi) = f.bounds();
    // Seed polyline from nodal data.
    let (values, origin, spacing) = seed_values(f, lo, hi)?;
    let polylines = marching::contours(&values, level);
    if polylines.is_empty() {
        return Err(Error::NoContour { level });
    }
    let components = polylines.len();
    let best = polylines
        .iter()
        .max_by(|a, b| a.index_length().total_cmp(&b.index_length()))
        .unwrap();
    let closed = best.closed;
    let mut pts: Vec<[f64; 2]> = best
        .points
        .iter()
        .map(|p| [origin[0] + p[0] * spacing[0], origin[1] + p[1] * spacing[1]])
        .collect();
    // Refine onto the true level set.
    for p in &mut pts {
        newton_to_level(f, level, p, grad_floor)?;
    }
    // Arc-length resample.
    let (xi1, points, length) = resample(&pts, closed, n_samples);
    // Refine the resampled points too (resampling interpolates chords).
    let mut points = points;
    for p in &mut points {
        newton_to_level(f, level, p, grad_floor)?;
    }
    Ok(LevelCurve {
        case_: f.case(),
        level,
        closed,
        xi1,
        points,
        length,
        components,
    })
}

fn seed_values(
    f: &dyn LevelField,
    lo: [f64; 2],
    hi: [f64; 2],
) -> Result<(Array2<f64>, [f64; 2], [f64; 2])> {
    let n = SEED_GRID;
    let spacing = [(hi[0] - lo[0]) / (n - 1) as f64, (hi[1] - lo[1]) / (n - 1) as f64];
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            values[[i, j]] = f.value([lo[0] + i as f64 * spacing[0], lo[1] + j as f64 * spacing[1]])?;
        }
    }
    Ok((values, lo, spacing))
}

fn newton_to_level(f: &dyn LevelField, level: f64, p: &mut [f64; 2], grad_floor: f64) -> Result<()> {
    for _ in 0..25 {
        let v = f.value(*p)?;
        let g = f.gradient(*p)?;
        let gg = g[0] * g[0] + g[1] * g[1];
        if gg.sqrt() < grad_floor {
            return Err(Error::NonRegularLevel(level));
        }
        let d = v - level;
        if d.abs() <= 1e-13 * level.abs().max(1.0) {
            return Ok(());
        }
        p[0] -= d * g[0] / gg;
        p[1] -= d * g[1] / gg;
    }
    let v = f.value(*p)?;
    if (v - level).abs() <= 1e-10 * level.abs().max(1.0) {
        Ok(())
    } else {
        Err(Error::NonRegularLevel(level))
    }
}

fn resample(pts: &[[f64; 2]], closed: bool, n: usize) -> (Vec<f64>, Vec<[f64; 2]>, f64) {
    // Cumulative chord lengths.
    let m = pts.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for k in 1..m {
        let d = dist(pts[k - 1], pts[k]);
        cum.push(cum[k - 1] + d);
    }
    let total = if closed {
        cum[m - 1] + dist(pts[m - 1], pts[0])
    } else {
        cum[m - 1]
    };
    let at = |s: f64| -> [f64; 2] {
        let s = s.clamp(0.0, total);
        // Find segment.
        let mut k = match cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        if k >= m - 1 {
            if closed {
                let seg = total - cum[m - 1];
                let t = if seg > 0.0 { (s - cum[m - 1]) / seg } else { 0.0 };
                return lerp(pts[m - 1], pts[0], t.clamp(0.0, 1.0));
            }
            k = m - 2;
        }
        let seg = cum[k + 1] - cum[k];
        let t = if seg > 0.0 { (s - cum[k]) / seg } else { 0.0 };
        lerp(pts[k], pts[k + 1], t.clamp(0.0, 1.0))
    };
    let mut xi1 = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    if closed {
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            xi1.push(std::f64::consts::TAU * k as f64 / n as f64);
            out.push(at(s));
        }
    } else {
        for k in 0..n {
            let s = total * k as f64 / (n - 1) as f64;
            xi1.push(s);
            out.push(at(s));
        }
    }
    (xi1, out, total)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

//! 1D profiles g(s) used as proportionality factors and vortex
//! nonlinearities.
//!
//! A profile stores uniform samples plus an optional closed-form tag. Tagged
//! profiles evaluate the closed form (exact derivatives); untagged profiles
//! interpolate the samples with a monotone cubic (Fritsch-Carlson limiting,
//! no overshoot between nodes).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed forms a profile can carry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileTag {
    Constant { value: f64 },
    Linear { slope: f64, intercept: f64 },
    /// `scale * max(s, 0)^exponent`, derivative `scale * exponent * max(s, 0)^(exponent-1)`.
    PowerPlus { exponent: f64, scale: f64 },
}

/// Scalar profile on a uniform 1D grid.
///
/// Untagged evaluation caches the limited node slopes on first use; rebuild
/// the profile rather than mutating `samples` in place.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProfile {
    pub start: f64,
    pub step: f64,
    pub samples: Vec<f64>,
    pub tag: Option<ProfileTag>,
    pub name: String,
    #[serde(skip)]
    slopes: OnceLock<Vec<f64>>,
}

impl RadialProfile {
    pub fn from_samples(start: f64, step: f64, samples: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!("profile step {} <= 0", step)));
        }
        if samples.len() < 2 {
            return Err(Error::GridTooSmall(format!("profile with {} samples", samples.len())));
        }
        Ok(Self {
            start,
            step,
            samples,
            tag: None,
            name: name.into(),
            slopes: OnceLock::new(),
        })
    }

    pub fn from_fn(
        start: f64,
        end: f64,
        n: usize,
        name: impl Into<String>,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall(format!("profile with {} samples", n)));
        }
        let step = (end - start) / (n - 1) as f64;
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "degenerate profile domain [{}, {}]",
                start, end
            )));
        }
        let samples = (0..n).map(|i| f(start + i as f64 * step)).collect();
        Self::from_samples(start, step, samples, name)
    }

    pub fn tagged(
        tag: ProfileTag,
        start: f64,
        end: f64,
        n: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        let mut p = Self::from_fn(start, end, n, name, |s| eval_tag(tag, s))?;
        p.tag = Some(tag);
        Ok(p)
    }

    pub fn constant(value: f64, start: f64, end: f64, name: impl Into<String>) -> Result<Self> {
        Self::tagged(ProfileTag::Constant { value }, start, end, 2, name)
    }

    pub fn end(&self) -> f64 {
        self.start + (self.samples.len() - 1) as f64 * self.step
    }

    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let n = self.samples.len();
        let u = (s - self.start) / self.step;
        let eps = 1e-9;
        if u < -eps || u > (n - 1) as f64 + eps {
            return Err(Error::ProfileDomain {
                value: s,
                lo: self.start,
                hi: self.end(),
            });
        }
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        Ok((i, u - i as f64))
    }

    /// Limited node slopes (Fritsch-Carlson): monotone data interpolates
    /// monotonically, flat segments stay flat. Cached after the first call.
    fn node_slopes(&self) -> &[f64] {
        self.slopes.get_or_init(|| {
            let y = &self.samples;
            let h = self.step;
            let n = y.len();
            let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h).collect();
            let mut m = vec![0.0; n];
            m[0] = d[0];
            m[n - 1] = d[n - 2];
            for i in 1..n - 1 {
                if d[i - 1] * d[i] <= 0.0 {
                    m[i] = 0.0;
                } else {
                    m[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);
                }
            }
            for i in 0..n - 1 {
                if d[i] == 0.0 {
                    m[i] = 0.0;
                    m[i + 1] = 0.0;
                } else {
                    let a = m[i] / d[i];
                    let b = m[i + 1] / d[i];
                    let s = a * a + b * b;
                    if s > 9.0 {
                        let t = 3.0 / s.sqrt();
                        m[i] = t * a * d[i];
                        m[i + 1] = t * b * d[i];
                    }
                }
            }
            m
        })
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if let Some(tag) = self.tag {
            return Ok(eval_tag(tag, s));
        }
        let (i, t) = self.locate(s)?;
        let m = self.node_slopes();
        let h = self.step;
        let (y0, y1) = (self.samples[i], self.samples[i + 1]);
        let (h00, h10, h01, h11) = hermite_basis(t);
        Ok(h00 * y0 + h10 * h * m[i] + h01 * y1 + h11 * h * m[i + 1])
    }

    pub fn deriv(&self, s: f64) -> Result<f64> {
        if let Some(tag) = self.tag {
            return Ok(deriv_tag(tag, s));
        }
        let (i, t) = self.locate(s)?;
        let m = self.node_slopes();
        let h = self.step;
        let (y0, y1) = (self.samples[i], self.samples[i + 1]);
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -6.0 * t * t + 6.0 * t;
        let dh11 = 3.0 * t * t - 2.0 * t;
        Ok((dh00 * y0 + dh01 * y1) / h + dh10 * m[i] + dh11 * m[i + 1])
    }

    /// Antiderivative with value 0 at the left endpoint, by exact
    /// integration of the interpolant (or of the closed form when tagged).
    pub fn antiderivative(&self, s: f64) -> Result<f64> {
        if let Some(tag) = self.tag {
            return Ok(antideriv_tag(tag, s) - antideriv_tag(tag, self.start));
        }
        let (i, t) = self.locate(s)?;
        let m = self.node_slopes();
        let h = self.step;
        let mut acc = 0.0;
        for k in 0..i {
            acc += segment_integral(self.samples[k], self.samples[k + 1], m[k], m[k + 1], h, 1.0);
        }
        acc += segment_integral(self.samples[i], self.samples[i + 1], m[i], m[i + 1], h, t);
        Ok(acc)
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// Integral of the Hermite segment over local parameter [0, t], scaled by h.
fn segment_integral(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let ih00 = 0.5 * t4 - t3 + t;
    let ih10 = 0.25 * t4 - (2.0 / 3.0) * t3 + 0.5 * t2;
    let ih01 = -0.5 * t4 + t3;
    let ih11 = 0.25 * t4 - t3 / 3.0;
    h * (ih00 * y0 + ih01 * y1) + h * h * (ih10 * m0 + ih11 * m1)
}

fn eval_tag(tag: ProfileTag, s: f64) -> f64 {
    match tag {
        ProfileTag::Constant { value } => value,
        ProfileTag::Linear { slope, intercept } => slope * s + intercept,
        ProfileTag::PowerPlus { exponent, scale } => {
            if s > 0.0 {
                scale * s.powf(exponent)
            } else {
                0.0
            }
        }
    }
}

fn deriv_tag(tag: ProfileTag, s: f64) -> f64 {
    match tag {
        ProfileTag::Constant { .. } => 0.0,
        ProfileTag::Linear { slope, .. } => slope,
        ProfileTag::PowerPlus { exponent, scale } => {
            if s > 0.0 {
                scale * exponent * s.powf(exponent - 1.0)
            } else {
                0.0
            }
        }
    }
}

fn antideriv_tag(tag: ProfileTag, s: f64) -> f64 {
    match tag {
        ProfileTag::Constant { value } => value * s,
        ProfileTag::Linear { slope, intercept } => 0.5 * slope * s * s + intercept * s,
        ProfileTag::PowerPlus { exponent, scale } => {
            if s > 0.0 {
                scale * s.powf(exponent + 1.0) / (exponent + 1.0)
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_profiles_evaluate_closed_forms() {
        let p = RadialProfile::tagged(
            ProfileTag::PowerPlus { exponent: 3.0, scale: 2.0 },
            -1.0,
            1.0,
            33,
            "g",
        )
        .unwrap();
        assert_eq!(p.eval(-0.5).unwrap(), 0.0);
        assert!((p.eval(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((p.deriv(0.5).unwrap() - 1.5).abs() < 1e-15);
        assert!((p.antiderivative(1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolant_is_exact_on_cubics_with_exact_slopes_only_at_nodes() {
        // Untagged data from a smooth function: node values reproduce exactly,
        // interior error is O(h^3) or better.
        let f = |s: f64| (1.3 * s).sin();
        let p = RadialProfile::from_fn(0.0, 2.0, 81, "g", f).unwrap();
        for k in 0..81 {
            let s = 0.025 * k as f64;
            assert!((p.eval(s).unwrap() - f(s)).abs() < 1e-12);
        }
        // Limited slopes are O(h^2) accurate, so the interpolant is O(h^3):
        // h = 0.025 here.
        let mut worst = 0.0f64;
        for k in 0..800 {
            let s = 0.0025 * k as f64;
            worst = worst.max((p.eval(s).unwrap() - f(s)).abs());
        }
        assert!(worst < 3e-4, "interior error {}", worst);
    }

    #[test]
    fn monotone_data_interpolates_without_overshoot() {
        let p = RadialProfile::from_samples(0.0, 1.0, vec![0.0, 0.0, 1.0, 1.0, 3.0], "steps").unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let v = p.eval(4.0 * k as f64 / 400.0).unwrap();
            assert!(v >= prev - 1e-12);
            assert!((-1e-12..=3.0 + 1e-12).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        let f = |s: f64| 1.0 + s * s;
        let exact = 2.0 + 8.0 / 3.0;
        let mut errs = Vec::new();
        for n in [51usize, 101, 201] {
            let p = RadialProfile::from_fn(0.0, 2.0, n, "g", f).unwrap();
            errs.push((p.antiderivative(2.0).unwrap() - exact).abs());
        }
        assert!(errs[2] < 1e-5, "error {}", errs[2]);
        // Endpoint slopes limit the quadrature to third order.
        assert!(errs[0] / errs[2] > 20.0, "ratios {:?}", errs);
    }

    #[test]
    fn domain_errors_are_reported() {
        let p = RadialProfile::from_fn(0.0, 1.0, 11, "g", |s| s).unwrap();
        assert!(matches!(p.eval(1.5), Err(Error::ProfileDomain { .. })));
        // Tagged profiles evaluate their closed form everywhere.
        let q = RadialProfile::tagged(ProfileTag::Linear { slope: 2.0, intercept: 0.0 }, 0.0, 1.0, 2, "l")
            .unwrap();
        assert!((q.eval(10.0).unwrap() - 20.0).abs() < 1e-15);
    }
}

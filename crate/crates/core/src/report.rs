//! Diagnostic reports: named residual norms plus metadata, serializable to
//! JSON with deterministic key order.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportEntry {
    pub name: String,
    pub norm_inf: f64,
    pub norm_l2: f64,
    pub grid_spacing: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticReport {
    pub entries: Vec<ReportEntry>,
    pub metadata: BTreeMap<String, String>,
}

impl DiagnosticReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, norm_inf: f64, norm_l2: f64, grid_spacing: f64) {
        self.entries.push(ReportEntry {
            name: name.into(),
            norm_inf,
            norm_l2,
            grid_spacing,
        });
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn get(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Max and volume-weighted L2 norms over interior nodes (`margin` rings of
/// nodes dropped per side). One-sided stencils near boundaries carry lower
/// order, so convergence studies measure interiors.
pub fn norms2_interior(v: &Array2<f64>, spacing: [f64; 2], margin: usize) -> (f64, f64) {
    let (n1, n2) = v.dim();
    if n1 <= 2 * margin || n2 <= 2 * margin {
        return (0.0, 0.0);
    }
    let mut m = 0.0f64;
    let mut s = 0.0f64;
    for i in margin..n1 - margin {
        for j in margin..n2 - margin {
            let x = v[[i, j]];
            m = m.max(x.abs());
            s += x * x;
        }
    }
    let cell = spacing[0] * spacing[1];
    (m, (s * cell).sqrt())
}

pub fn norms3_interior(v: &Array3<f64>, spacing: [f64; 3], margin: usize) -> (f64, f64) {
    let (n1, n2, n3) = v.dim();
    if n1 <= 2 * margin || n2 <= 2 * margin || n3 <= 2 * margin {
        return (0.0, 0.0);
    }
    let mut m = 0.0f64;
    let mut s = 0.0f64;
    for i in margin..n1 - margin {
        for j in margin..n2 - margin {
            for k in margin..n3 - margin {
                let x = v[[i, j, k]];
                m = m.max(x.abs());
                s += x * x;
            }
        }
    }
    let cell = spacing[0] * spacing[1] * spacing[2];
    (m, (s * cell).sqrt())
}

/// Least-squares slope of log(err) against log(h). Requires at least two
/// (h, err) pairs with positive entries; pairs with err = 0 are dropped.
pub fn order_estimate(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

//! Marching squares with edge-keyed crossings.
//!
//! Crossing points are computed once per grid edge and shared by the two
//! adjacent cells, so chained polylines are bit-identical regardless of
//! traversal order. Saddle cells are disambiguated by the cell-center
//! average. Traversal starts from the lowest edge id, which makes the
//! output deterministic.

use std::collections::BTreeMap;

use ndarray::Array2;

/// Grid edge between two adjacent nodes: `(i, j, dir)` with dir 0 for the
/// edge to `(i+1, j)` and 1 for the edge to `(i, j+1)`.
type EdgeId = (usize, usize, u8);

#[derive(Clone, Debug)]
pub struct Polyline {
    /// Points in index space (fractional grid coordinates).
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    pub fn index_length(&self) -> f64 {
        let mut l = 0.0;
        for w in self.points.windows(2) {
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            l += (dx * dx + dy * dy).sqrt();
        }
        if self.closed && self.points.len() > 1 {
            let a = self.points[self.points.len() - 1];
            let b = self.points[0];
            l += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        }
        l
    }
}

/// Signed value with exact-zero nudged to the positive side, so crossing
/// detection never degenerates.
fn side(v: f64, level: f64) -> bool {
    v > level
}

fn crossing(v0: f64, v1: f64, level: f64) -> Option<f64> {
    let (s0, s1) = (side(v0, level), side(v1, level));
    if s0 == s1 {
        return None;
    }
    let t = (level - v0) / (v1 - v0);
    Some(t.clamp(0.0, 1.0))
}

/// Extract all level-`level` polylines of nodal data, in index space.
pub fn contours(values: &Array2<f64>, level: f64) -> Vec<Polyline> {
    let (n1, n2) = values.dim();
    // 1. Crossing positions per edge.
    let mut points: BTreeMap<EdgeId, [f64; 2]> = BTreeMap::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if i + 1 < n1 {
                if let Some(t) = crossing(values[[i, j]], values[[i + 1, j]], level) {
                    points.insert((i, j, 0), [i as f64 + t, j as f64]);
                }
            }
            if j + 1 < n2 {
                if let Some(t) = crossing(values[[i, j]], values[[i, j + 1]], level) {
                    points.insert((i, j, 1), [i as f64, j as f64 + t]);
                }
            }
        }
    }
    // 2. Segments per cell, as adjacency between edge ids.
    let mut adj: BTreeMap<EdgeId, Vec<EdgeId>> = BTreeMap::new();
    let mut connect = |a: EdgeId, b: EdgeId| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for i in 0..n1 - 1 {
        for j in 0..n2 - 1 {
            let bottom = (i, j, 0u8);
            let top = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            let right = (i + 1, j, 1u8);
            let hits: Vec<EdgeId> = [bottom, left, top, right]
                .into_iter()
                .filter(|e| points.contains_key(e))
                .collect();
            match hits.len() {
                0 => {}
                2 => connect(hits[0], hits[1]),
                4 => {
                    // Saddle: split by the center average.
                    let c = 0.25
                        * (values[[i, j]]
                            + values[[i + 1, j]]
                            + values[[i, j + 1]]
                            + values[[i + 1, j + 1]]);
                    let corner = side(values[[i, j]], level);
                    if side(c, level) == corner {
                        // Contour separates the two opposite corners from
                        // the center blob: bottom-right and top-left pairs.
                        connect(bottom, right);
                        connect(top, left);
                    } else {
                        connect(bottom, left);
                        connect(top, right);
                    }
                }
                _ => {
                    // 1 or 3 hits cannot happen with consistent sides.
                    debug_assert!(false, "inconsistent cell at ({}, {})", i, j);
                }
            }
        }
    }
    // 3. Chain.
    let mut used: BTreeMap<EdgeId, bool> = BTreeMap::new();
    let mut out = Vec::new();
    let ids: Vec<EdgeId> = points.keys().cloned().collect();
    for start in ids {
        if used.get(&start).copied().unwrap_or(false) {
            continue;
        }
        let neighbors = adj.get(&start).map(Vec::len).unwrap_or(0);
        if neighbors == 0 {
            used.insert(start, true);
            continue;
        }
        // Walk to one end first (or all the way around a loop).
        let mut chain = vec![start];
        used.insert(start, true);
        let mut closed = false;
        'grow: loop {
            let cur = *chain.last().unwrap();
            let next = adj[&cur]
                .iter()
                .find(|e| !used.get(*e).copied().unwrap_or(false))
                .cloned();
            match next {
                Some(e) => {
                    used.insert(e, true);
                    chain.push(e);
                }
                None => {
                    if adj[&cur].contains(&start) && chain.len() > 2 {
                        closed = true;
                    }
                    break 'grow;
                }
            }
        }
        if !closed {
            // Walk from the start in the other direction and prepend.
            loop {
                let cur = chain[0];
                let next = adj[&cur]
                    .iter()
                    .find(|e| !used.get(*e).copied().unwrap_or(false))
                    .cloned();
                match next {
                    Some(e) => {
                        used.insert(e, true);
                        chain.insert(0, e);
                    }
                    None => break,
                }
            }
        }
        if chain.len() < 2 {
            continue;
        }
        out.push(Polyline {
            points: chain.iter().map(|e| points[e]).collect(),
            closed,
        });
    }
    out
}

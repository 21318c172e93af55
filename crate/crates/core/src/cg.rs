//! Matrix-free conjugate gradients on 2D arrays.
//!
//! Vectors are full grid arrays whose boundary ring is identically zero; the
//! operator closure must preserve that convention (stencil on interior
//! nodes, zeros on the boundary). Inner products then run over the whole
//! array without masking.

use ndarray::Array2;

use crate::error::{Error, Result};

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub struct CgOutcome {
    pub solution: Array2<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve A x = b for SPD A with relative tolerance `tol` on the residual.
/// `x0` is the warm start (its boundary ring must be zero).
pub fn conjugate_gradient(
    apply: impl Fn(&Array2<f64>) -> Array2<f64>,
    b: &Array2<f64>,
    x0: Array2<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: Array2::zeros(b.dim()),
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = x0;
    let ax = apply(&x);
    let mut r = b - &ax;
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol * b_norm {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual: rr.sqrt() / b_norm,
        });
    }
    for k in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NonFinite(format!(
                "conjugate gradients met a non-positive curvature {:.3e} at iteration {}",
                pap, k
            )));
        }
        let alpha = rr / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * b_norm {
            return Ok(CgOutcome {
                solution: x,
                iterations: k,
                residual: rr_new.sqrt() / b_norm,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = &r + &(beta * &p);
    }
    Err(Error::CgStalled {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

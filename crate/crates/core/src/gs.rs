//! Semilinear elliptic solvers for the stream-function reductions.
//!
//! Translational symmetry reduces the eigenfield relation to
//! `-lap(psi) = g(psi)` on an (x1, x2) rectangle; rotational symmetry
//! reduces it to `L psi = g(psi)` on an (r, z) rectangle, where
//! `L = -(d_rr - d_r/r + d_zz)` is the flux-surface operator.
//!
//! The discrete flux-surface operator used in the solves is the flux form
//! `M = -d_r((1/r) d_r .) - (1/r) d_zz` with half-node coefficients, which
//! is symmetric positive definite and annihilates both constants and r^2
//! exactly on uniform grids; the equation solved is `M psi = g / r`. The
//! literal centered form is kept for residual reporting.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cg::conjugate_gradient;
use crate::chart::{ChartTag, ScalarChartField};
use crate::error::{Error, Result};
use crate::profile::RadialProfile;

/// Which reduction the solve targets.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// Minus the planar Laplacian on a cartesian-xy grid.
    LaplacianXy,
    /// The flux-surface operator on a meridional-rz grid.
    GradShafranovRz,
}

impl Operator {
    pub fn chart(self) -> ChartTag {
        match self {
            Operator::LaplacianXy => ChartTag::CartesianXy,
            Operator::GradShafranovRz => ChartTag::MeridionalRz,
        }
    }
}

/// Right-hand side of the reduced equation.
#[derive(Clone, Debug)]
pub enum Rhs {
    /// Homogeneous: the solve returns the discrete-harmonic extension of
    /// the boundary data.
    Zero,
    /// Fixed source independent of psi (one linear solve).
    Source(ScalarChartField),
    /// Semilinear: g evaluated at `shift + psi`, with `shift` a frozen
    /// field (a vortex background, for instance).
    Profile {
        g: RadialProfile,
        shift: Option<Box<ScalarChartField>>,
    },
}

/// Boundary data on the rectangle edge.
#[derive(Clone, Debug)]
pub enum Dirichlet {
    Constant(f64),
    /// Edge values read from a field on the same grid.
    Field(ScalarChartField),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iter: usize,
    /// Relative tolerance on the discrete semilinear residual.
    pub tol: f64,
    /// Under-relaxation of the fixed-point update.
    pub omega: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Outer iterations without improvement before giving up.
    pub stall_window: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-9,
            omega: 0.8,
            cg_tol: 1e-10,
            cg_max_iter: 50_000,
            stall_window: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub cg_iterations_total: usize,
}

/// Uniform rectangle the solve lives on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeom {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub shape: [usize; 2],
}

impl GridGeom {
    pub fn rect(lo: [f64; 2], hi: [f64; 2], shape: [usize; 2]) -> Result<Self> {
        if shape[0] < 4 || shape[1] < 4 {
            return Err(Error::GridTooSmall(format!("{}x{}", shape[0], shape[1])));
        }
        let spacing = [
            (hi[0] - lo[0]) / (shape[0] - 1) as f64,
            (hi[1] - lo[1]) / (shape[1] - 1) as f64,
        ];
        if spacing[0] <= 0.0 || spacing[1] <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "degenerate rectangle [{:?}, {:?}]",
                lo, hi
            )));
        }
        Ok(Self {
            origin: lo,
            spacing,
            shape,
        })
    }

    pub fn r_at(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.spacing[0]
    }

    fn field(&self, chart: ChartTag, values: Array2<f64>, name: &str) -> Result<ScalarChartField> {
        ScalarChartField::new(chart, self.origin, self.spacing, values, name)
    }
}

/// The discrete SPD system for one operator on one grid.
pub struct LinearSystem {
    pub op: Operator,
    pub geom: GridGeom,
}

impl LinearSystem {
    pub fn new(op: Operator, geom: GridGeom) -> Result<Self> {
        if op == Operator::GradShafranovRz && geom.origin[0] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "meridional grid needs r >= 0, got r0 = {}",
                geom.origin[0]
            )));
        }
        if op == Operator::GradShafranovRz && geom.r_at(1) <= 0.0 {
            return Err(Error::InvalidParameter(
                "first interior radius must be positive".into(),
            ));
        }
        Ok(Self { op, geom })
    }

    /// SPD stencil applied to a full array (boundary ring treated as part
    /// of the vector); output is zero on the boundary ring.
    pub fn apply(&self, v: &Array2<f64>) -> Array2<f64> {
        let [n1, n2] = self.geom.shape;
        let [h1, h2] = self.geom.spacing;
        let mut out = Array2::zeros((n1, n2));
        match self.op {
            Operator::LaplacianXy => {
                let (c1, c2) = (1.0 / (h1 * h1), 1.0 / (h2 * h2));
                for i in 1..n1 - 1 {
                    for j in 1..n2 - 1 {
                        out[[i, j]] = c1 * (2.0 * v[[i, j]] - v[[i + 1, j]] - v[[i - 1, j]])
                            + c2 * (2.0 * v[[i, j]] - v[[i, j + 1]] - v[[i, j - 1]]);
                    }
                }
            }
            Operator::GradShafranovRz => {
                let c1 = 1.0 / (h1 * h1);
                let c2 = 1.0 / (h2 * h2);
                for i in 1..n1 - 1 {
                    let r = self.geom.r_at(i);
                    let r_e = r + 0.5 * h1;
                    let r_w = r - 0.5 * h1;
                    for j in 1..n2 - 1 {
                        let radial = c1
                            * ((v[[i, j]] - v[[i + 1, j]]) / r_e + (v[[i, j]] - v[[i - 1, j]]) / r_w);
                        let axial = c2 * (2.0 * v[[i, j]] - v[[i, j + 1]] - v[[i, j - 1]]) / r;
                        out[[i, j]] = radial + axial;
                    }
                }
            }
        }
        out
    }

    /// Weight w such that the solved system is `M psi = g / w` when the
    /// reduced equation is `L psi = g`: w = r for the flux operator, 1 for
    /// the Laplacian.
    pub fn rhs_weight(&self, i: usize) -> f64 {
        match self.op {
            Operator::LaplacianXy => 1.0,
            Operator::GradShafranovRz => self.geom.r_at(i),
        }
    }

    /// Solve the linear system with Dirichlet data `bc` and source `g`
    /// (the reduced equation's right side, unweighted), warm starting from
    /// `x0` when given. Returns the full solution field and CG iterations.
    pub fn solve_linear(
        &self,
        g: &Array2<f64>,
        bc: &BoundaryValues,
        x0: Option<&Array2<f64>>,
        cg_tol: f64,
        cg_max_iter: usize,
    ) -> Result<(Array2<f64>, usize)> {
        let [n1, n2] = self.geom.shape;
        let bc_full = bc.materialize(self.geom.shape);
        let a_bc = self.apply(&bc_full);
        let mut b = Array2::zeros((n1, n2));
        for i in 1..n1 - 1 {
            let w = self.rhs_weight(i);
            for j in 1..n2 - 1 {
                b[[i, j]] = g[[i, j]] / w - a_bc[[i, j]];
            }
        }
        let x0 = match x0 {
            Some(prev) => {
                // Interior part of the previous solution relative to bc.
                let mut z = prev - &bc_full;
                zero_boundary(&mut z);
                z
            }
            None => Array2::zeros((n1, n2)),
        };
        let out = conjugate_gradient(|v| self.apply(v), &b, x0, cg_tol, cg_max_iter)?;
        let mut full = out.solution + &bc_full;
        // The homogeneous part has an exactly zero ring, so the sum carries
        // the boundary data verbatim.
        enforce_boundary(&mut full, &bc_full);
        Ok((full, out.iterations))
    }

    /// Norms of the discrete defect `M psi - g / w` and of the weighted
    /// source `g / w` over interior nodes (cell-weighted L2). Callers
    /// choose the normalization; near-zero branches need a fixed reference
    /// rather than the shrinking source norm.
    pub fn residual_norms(&self, psi: &Array2<f64>, g: &Array2<f64>) -> (f64, f64) {
        let [n1, n2] = self.geom.shape;
        let a = self.apply(psi);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..n1 - 1 {
            let w = self.rhs_weight(i);
            for j in 1..n2 - 1 {
                let rhs = g[[i, j]] / w;
                let d = a[[i, j]] - rhs;
                num += d * d;
                den += rhs * rhs;
            }
        }
        let cell = self.geom.spacing[0] * self.geom.spacing[1];
        ((num * cell).sqrt(), (den * cell).sqrt())
    }
}

fn zero_boundary(v: &mut Array2<f64>) {
    let (n1, n2) = v.dim();
    for i in 0..n1 {
        v[[i, 0]] = 0.0;
        v[[i, n2 - 1]] = 0.0;
    }
    for j in 0..n2 {
        v[[0, j]] = 0.0;
        v[[n1 - 1, j]] = 0.0;
    }
}

fn enforce_boundary(v: &mut Array2<f64>, bc: &Array2<f64>) {
    let (n1, n2) = v.dim();
    for i in 0..n1 {
        v[[i, 0]] = bc[[i, 0]];
        v[[i, n2 - 1]] = bc[[i, n2 - 1]];
    }
    for j in 0..n2 {
        v[[0, j]] = bc[[0, j]];
        v[[n1 - 1, j]] = bc[[n1 - 1, j]];
    }
}

/// Dirichlet data resolved to edge values.
pub struct BoundaryValues {
    values: Array2<f64>,
}

impl BoundaryValues {
    pub fn resolve(bc: &Dirichlet, geom: &GridGeom, chart: ChartTag) -> Result<Self> {
        let [n1, n2] = geom.shape;
        let mut values = Array2::zeros((n1, n2));
        match bc {
            Dirichlet::Constant(c) => {
                for i in 0..n1 {
                    values[[i, 0]] = *c;
                    values[[i, n2 - 1]] = *c;
                }
                for j in 0..n2 {
                    values[[0, j]] = *c;
                    values[[n1 - 1, j]] = *c;
                }
            }
            Dirichlet::Field(f) => {
                if f.chart != chart {
                    return Err(Error::ChartMismatch(format!(
                        "boundary data tagged {} for a {} solve",
                        f.chart.as_str(),
                        chart.as_str()
                    )));
                }
                if f.shape() != geom.shape
                    || f.origin != geom.origin
                    || f.spacing != geom.spacing
                {
                    return Err(Error::IncompatibleGrids("boundary data vs solve grid".into()));
                }
                for i in 0..n1 {
                    values[[i, 0]] = f.values[[i, 0]];
                    values[[i, n2 - 1]] = f.values[[i, n2 - 1]];
                }
                for j in 0..n2 {
                    values[[0, j]] = f.values[[0, j]];
                    values[[n1 - 1, j]] = f.values[[n1 - 1, j]];
                }
            }
        }
        Ok(Self { values })
    }

    fn materialize(&self, shape: [usize; 2]) -> Array2<f64> {
        debug_assert_eq!(self.values.dim(), (shape[0], shape[1]));
        self.values.clone()
    }
}

/// Literal centered-difference application of the reduced operator, for
/// residual reporting against external fields. Boundary entries are zero.
pub fn operator_apply(op: Operator, psi: &ScalarChartField) -> Result<ScalarChartField> {
    if psi.chart != op.chart() {
        return Err(Error::ChartMismatch(format!(
            "operator expects {}, field is {}",
            op.chart().as_str(),
            psi.chart.as_str()
        )));
    }
    let [n1, n2] = psi.shape();
    let [h1, h2] = psi.spacing;
    let mut out = Array2::zeros((n1, n2));
    for i in 1..n1 - 1 {
        for j in 1..n2 - 1 {
            let pxx = (psi.values[[i + 1, j]] - 2.0 * psi.values[[i, j]] + psi.values[[i - 1, j]])
                / (h1 * h1);
            let pyy = (psi.values[[i, j + 1]] - 2.0 * psi.values[[i, j]] + psi.values[[i, j - 1]])
                / (h2 * h2);
            out[[i, j]] = match op {
                Operator::LaplacianXy => -(pxx + pyy),
                Operator::GradShafranovRz => {
                    let r = psi.origin[0] + i as f64 * h1;
                    if r <= 0.0 {
                        return Err(Error::InvalidParameter(
                            "flux operator needs r > 0 at interior nodes".into(),
                        ));
                    }
                    let pr = (psi.values[[i + 1, j]] - psi.values[[i - 1, j]]) / (2.0 * h1);
                    -(pxx - pr / r + pyy)
                }
            };
        }
    }
    ScalarChartField::new(psi.chart, psi.origin, psi.spacing, out, format!("L[{}]", psi.name))
}

/// Fixed-point solve of the reduced semilinear problem.
///
/// The residual is checked before the first linear solve, so an initial
/// guess that already satisfies the discrete equation converges at
/// iteration zero. Plain relaxed iteration is only stable near weakly
/// nonlinear branches; the free-boundary solvers drive this system with
/// normalization strategies of their own.
pub fn solve_semilinear(
    op: Operator,
    geom: GridGeom,
    rhs: &Rhs,
    bc: &Dirichlet,
    params: &SolverParams,
    guess: Option<&ScalarChartField>,
) -> Result<(ScalarChartField, SolveReport)> {
    let sys = LinearSystem::new(op, geom)?;
    let chart = op.chart();
    let bvals = BoundaryValues::resolve(bc, &geom, chart)?;
    let [n1, n2] = geom.shape;
    let mut psi = match guess {
        Some(f) => {
            if f.shape() != geom.shape || f.origin != geom.origin || f.spacing != geom.spacing {
                return Err(Error::IncompatibleGrids("initial guess vs solve grid".into()));
            }
            f.values.clone()
        }
        None => bvals.materialize(geom.shape),
    };

    let eval_g = |psi: &Array2<f64>| -> Result<Array2<f64>> {
        let mut g = Array2::zeros((n1, n2));
        match rhs {
            Rhs::Zero => {}
            Rhs::Source(s) => {
                if s.shape() != geom.shape || s.origin != geom.origin || s.spacing != geom.spacing {
                    return Err(Error::IncompatibleGrids("source vs solve grid".into()));
                }
                g.assign(&s.values);
            }
            Rhs::Profile { g: prof, shift } => {
                if let Some(sh) = shift {
                    if sh.shape() != geom.shape
                        || sh.origin != geom.origin
                        || sh.spacing != geom.spacing
                    {
                        return Err(Error::IncompatibleGrids("shift vs solve grid".into()));
                    }
                }
                for i in 0..n1 {
                    for j in 0..n2 {
                        let s = match shift {
                            Some(sh) => sh.values[[i, j]] + psi[[i, j]],
                            None => psi[[i, j]],
                        };
                        g[[i, j]] = prof.eval(s)?;
                    }
                }
            }
        }
        Ok(g)
    };

    let linear = matches!(rhs, Rhs::Zero | Rhs::Source(_));
    let mut history = Vec::new();
    let mut cg_total = 0usize;
    let mut best = f64::INFINITY;
    let mut best_age = 0usize;
    // Reference norm for the relative residual, captured at iteration 0 so
    // branches converging to zero keep a meaningful denominator.
    let mut reference = 0.0f64;

    for iter in 0..=params.max_iter {
        let g = eval_g(&psi)?;
        let (num, den) = sys.residual_norms(&psi, &g);
        if iter == 0 {
            reference = den.max(num);
            if reference <= 0.0 {
                reference = 1.0;
            }
        }
        let res = num / den.max(reference);
        if !res.is_finite() {
            return Err(Error::NonFinite(format!("solver residual at iteration {}", iter)));
        }
        history.push(res);
        if res <= params.tol {
            let field = geom.field(chart, psi, "psi")?;
            return Ok((
                field,
                SolveReport {
                    converged: true,
                    iterations: iter,
                    final_residual: res,
                    residual_history: history,
                    cg_iterations_total: cg_total,
                },
            ));
        }
        if res < best * (1.0 - 1e-12) {
            best = res;
            best_age = 0;
        } else {
            best_age += 1;
            if best_age >= params.stall_window {
                return Err(Error::Stagnation {
                    iterations: iter,
                    residual: res,
                    best,
                    history,
                });
            }
        }
        if iter == params.max_iter {
            break;
        }
        let (solved, cg_iters) =
            sys.solve_linear(&g, &bvals, Some(&psi), params.cg_tol, params.cg_max_iter)?;
        cg_total += cg_iters;
        if linear {
            psi = solved;
            // One more pass records the post-solve residual and returns.
            continue;
        }
        let omega = params.omega;
        psi = (1.0 - omega) * &psi + omega * &solved;
        enforce_boundary(&mut psi, &bvals.materialize(geom.shape));
    }

    let res = *history.last().unwrap();
    Err(Error::Stagnation {
        iterations: params.max_iter,
        residual: res,
        best,
        history,
    })
}

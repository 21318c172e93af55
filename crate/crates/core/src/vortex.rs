//! Free-boundary vortex equilibria: steady cores in an ambient stream.
//!
//! Both reductions solve `L psi = g(bg + psi)` with zero Dirichlet data for
//! the perturbation psi, where the background `bg` encodes a uniform stream
//! with travel speed W and flux offset gamma:
//!
//! * pair (translational, upper half-plane): bg = -gamma - W x2,
//! * ring (axisymmetric): bg = -gamma - W r^2 / 2.
//!
//! The nonlinearity is the power g(s) = kappa l max(s, 0)^(2l - 1); the
//! vortex core is the free region where bg + psi > 0. The background lies
//! in the exact discrete kernel of the solve operator, so the trivial
//! branch psi = 0 satisfies the discrete problem to machine precision.
//!
//! Plain relaxed fixed-point iteration diverges from the nontrivial
//! branches: linearizing psi -> L^{-1} g(bg + psi) at a core solution gives
//! a principal eigenvalue above one (for the quadratic-well case it is the
//! ratio of the interior eigenvalue to the principal Dirichlet eigenvalue
//! of the core). The normalized modes remove the unstable amplitude
//! direction: `FixAmplitude` rescales every linear solve to a prescribed
//! peak value and reports the coefficient the normalization implies, and
//! `MatchCoefficient` wraps that in a log-log secant iteration on the peak
//! value until the implied coefficient hits a requested one.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartTag, ScalarChartField};
use crate::error::{Error, Result};
use crate::generators::{reconstruct_rotational, reconstruct_translational};
use crate::gs::{solve_semilinear, Dirichlet, GridGeom, LinearSystem, Operator, Rhs, SolveReport, SolverParams};
use crate::ops::Factor;
use crate::profile::{ProfileTag, RadialProfile};
use crate::vector::SymmetricVectorField;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VortexKind {
    /// Translational pair on the upper half-plane (odd reflection below).
    Pair,
    /// Axisymmetric ring.
    Ring,
}

impl VortexKind {
    pub fn operator(self) -> Operator {
        match self {
            VortexKind::Pair => Operator::LaplacianXy,
            VortexKind::Ring => Operator::GradShafranovRz,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    /// Start from psi = 0 (stays on the trivial branch).
    Trivial,
    /// Compactly supported C1 bump to ignite a core.
    Core {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchMode {
    /// Relaxed fixed-point iteration at a fixed coefficient. Converges on
    /// the trivial branch and for weak nonlinearities only.
    Plain { coefficient: f64 },
    /// Rescale each linear solve so the perturbation peaks at `target`;
    /// the coefficient becomes an output.
    FixAmplitude { target: f64 },
    /// Secant iteration on the peak value until the implied coefficient
    /// matches `coefficient`.
    MatchCoefficient { coefficient: f64, amplitude_guess: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeBoundaryProblem {
    pub kind: VortexKind,
    /// Travel speed W of the frame in which the vortex is steady.
    pub travel_speed: f64,
    /// Flux offset gamma shifting the free boundary.
    pub flux_offset: f64,
    /// Power index l of the nonlinearity.
    pub exponent: u32,
    pub domain: GridGeom,
    pub seed: SeedKind,
    pub branch: BranchMode,
    pub solver: SolverParams,
}

#[derive(Clone, Debug)]
pub struct VortexSolution {
    /// Full stream or flux function bg + psi.
    pub psi: ScalarChartField,
    /// Solved perturbation psi.
    pub perturbation: ScalarChartField,
    /// 1 inside the core (bg + psi > 0), 0 outside.
    pub core_mask: ScalarChartField,
    /// Coefficient kappa of the nonlinearity at the returned solution.
    pub coefficient: f64,
    /// Peak of the perturbation.
    pub amplitude: f64,
    pub report: SolveReport,
    pub trivial: bool,
}

/// Unit-coefficient nonlinearity l max(s, 0)^(2l - 1).
pub fn vortex_nonlinearity(exponent: u32, coefficient: f64) -> RadialProfile {
    RadialProfile::tagged(
        ProfileTag::PowerPlus {
            exponent: (2 * exponent - 1) as f64,
            scale: coefficient * exponent as f64,
        },
        -1.0,
        1.0,
        2,
        "vortex-g",
    )
    .expect("static profile")
}

/// Swirl (ring) or axial (pair) profile sqrt(kappa) max(s, 0)^l whose
/// square derivative chain reproduces the vortex nonlinearity.
pub fn vortex_stream_profile(exponent: u32, coefficient: f64) -> Result<RadialProfile> {
    if coefficient < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "vortex coefficient must be nonnegative, got {}",
            coefficient
        )));
    }
    RadialProfile::tagged(
        ProfileTag::PowerPlus {
            exponent: exponent as f64,
            scale: coefficient.sqrt(),
        },
        -1.0,
        1.0,
        2,
        "vortex-stream",
    )
}

impl FreeBoundaryProblem {
    fn validate(&self) -> Result<()> {
        if self.travel_speed <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "travel speed must be positive, got {}",
                self.travel_speed
            )));
        }
        if self.flux_offset < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "flux offset must be nonnegative, got {}",
                self.flux_offset
            )));
        }
        if self.exponent == 0 {
            return Err(Error::InvalidParameter("power index must be at least 1".into()));
        }
        match self.kind {
            VortexKind::Ring => {
                if self.domain.origin[0] < 0.0 {
                    return Err(Error::InvalidParameter(
                        "ring domain needs r >= 0".into(),
                    ));
                }
            }
            VortexKind::Pair => {
                if self.domain.origin[1] < 0.0 {
                    return Err(Error::InvalidParameter(
                        "pair domain lives on the upper half-plane (x2 >= 0)".into(),
                    ));
                }
            }
        }
        match self.branch {
            BranchMode::Plain { coefficient } if coefficient < 0.0 => Err(Error::InvalidParameter(
                "coefficient must be nonnegative".into(),
            )),
            BranchMode::FixAmplitude { target } if target <= 0.0 => Err(Error::InvalidParameter(
                "target amplitude must be positive".into(),
            )),
            BranchMode::MatchCoefficient { coefficient, amplitude_guess }
                if coefficient <= 0.0 || amplitude_guess <= 0.0 =>
            {
                Err(Error::InvalidParameter(
                    "coefficient and amplitude guess must be positive".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Background stream in which the core is embedded.
    pub fn background(&self) -> Result<ScalarChartField> {
        let geom = self.domain;
        let [n1, n2] = geom.shape;
        let mut vals = Array2::zeros((n1, n2));
        for i in 0..n1 {
            for j in 0..n2 {
                let a = geom.origin[0] + i as f64 * geom.spacing[0];
                let b = geom.origin[1] + j as f64 * geom.spacing[1];
                vals[[i, j]] = match self.kind {
                    VortexKind::Pair => -self.flux_offset - self.travel_speed * b,
                    VortexKind::Ring => -self.flux_offset - 0.5 * self.travel_speed * a * a,
                };
            }
        }
        ScalarChartField::new(
            self.kind.operator().chart(),
            geom.origin,
            geom.spacing,
            vals,
            "background",
        )
    }

    fn seed_array(&self) -> Array2<f64> {
        let geom = self.domain;
        let [n1, n2] = geom.shape;
        let mut vals = Array2::zeros((n1, n2));
        if let SeedKind::Core { center, radius, amplitude } = self.seed {
            for i in 1..n1 - 1 {
                for j in 1..n2 - 1 {
                    let a = geom.origin[0] + i as f64 * geom.spacing[0] - center[0];
                    let b = geom.origin[1] + j as f64 * geom.spacing[1] - center[1];
                    let q = 1.0 - (a * a + b * b) / (radius * radius);
                    if q > 0.0 {
                        vals[[i, j]] = amplitude * q * q;
                    }
                }
            }
        }
        vals
    }
}

/// Solve the free-boundary problem in the requested branch mode.
pub fn solve_free_boundary(problem: &FreeBoundaryProblem) -> Result<VortexSolution> {
    problem.validate()?;
    match problem.branch {
        BranchMode::Plain { coefficient } => solve_plain(problem, coefficient),
        BranchMode::FixAmplitude { target } => {
            let seed = problem.seed_array();
            solve_fixed_amplitude(problem, target, &seed)
        }
        BranchMode::MatchCoefficient { coefficient, amplitude_guess } => {
            solve_matched(problem, coefficient, amplitude_guess)
        }
    }
}

fn finish(
    problem: &FreeBoundaryProblem,
    psi_pert: Array2<f64>,
    coefficient: f64,
    report: SolveReport,
) -> Result<VortexSolution> {
    let geom = problem.domain;
    let chart = problem.kind.operator().chart();
    let bg = problem.background()?;
    let full = &bg.values + &psi_pert;
    let [n1, n2] = geom.shape;
    let mut mask = Array2::zeros((n1, n2));
    let mut core_nodes = 0usize;
    for i in 0..n1 {
        for j in 0..n2 {
            if full[[i, j]] > 0.0 {
                mask[[i, j]] = 1.0;
                core_nodes += 1;
            }
        }
    }
    let amplitude = psi_pert.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let trivial = core_nodes == 0 && amplitude.abs() < 1e-13;
    let mk = |vals: Array2<f64>, name: &str| {
        ScalarChartField::new(chart, geom.origin, geom.spacing, vals, name)
    };
    Ok(VortexSolution {
        psi: mk(full, "psi")?,
        perturbation: mk(psi_pert, "perturbation")?,
        core_mask: mk(mask, "core_mask")?,
        coefficient,
        amplitude,
        report,
        trivial,
    })
}

fn solve_plain(problem: &FreeBoundaryProblem, coefficient: f64) -> Result<VortexSolution> {
    let geom = problem.domain;
    let bg = problem.background()?;
    let g = vortex_nonlinearity(problem.exponent, coefficient);
    let chart = problem.kind.operator().chart();
    let guess = ScalarChartField::new(chart, geom.origin, geom.spacing, problem.seed_array(), "seed")?;
    let (psi, report) = solve_semilinear(
        problem.kind.operator(),
        geom,
        &Rhs::Profile { g, shift: Some(Box::new(bg)) },
        &Dirichlet::Constant(0.0),
        &problem.solver,
        Some(&guess),
    )?;
    finish(problem, psi.values, coefficient, report)
}

fn solve_fixed_amplitude(
    problem: &FreeBoundaryProblem,
    target: f64,
    seed: &Array2<f64>,
) -> Result<VortexSolution> {
    let geom = problem.domain;
    let params = &problem.solver;
    let sys = LinearSystem::new(problem.kind.operator(), geom)?;
    let bg = problem.background()?;
    let g_unit = vortex_nonlinearity(problem.exponent, 1.0);
    let bvals = crate::gs::BoundaryValues::resolve(
        &Dirichlet::Constant(0.0),
        &geom,
        problem.kind.operator().chart(),
    )?;
    let [n1, n2] = geom.shape;

    let mut psi = seed.clone();
    let mut kappa;
    let mut history = Vec::new();
    let mut cg_total = 0usize;
    let mut best = f64::INFINITY;
    let mut best_age = 0usize;

    for iter in 0..params.max_iter {
        // Unit-coefficient source at the current iterate.
        let mut g1 = Array2::zeros((n1, n2));
        for i in 0..n1 {
            for j in 0..n2 {
                g1[[i, j]] = g_unit.eval(bg.values[[i, j]] + psi[[i, j]])?;
            }
        }
        let (w, cg_iters) = sys.solve_linear(&g1, &bvals, Some(&psi), params.cg_tol, params.cg_max_iter)?;
        cg_total += cg_iters;
        let w_max = w.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        if !(w_max > 0.0) {
            return Err(Error::CoreCollapsed);
        }
        let alpha = target / w_max;
        kappa = alpha;

        // Residual of the full equation at the implied coefficient.
        let scaled_g: Array2<f64> = g1.mapv(|v| v * alpha);
        let (num, den) = sys.residual_norms(&psi, &scaled_g);
        let res = num / den.max(f64::MIN_POSITIVE);
        history.push(res);
        if !res.is_finite() {
            return Err(Error::NonFinite(format!("normalized solve at iteration {}", iter)));
        }
        if res <= params.tol {
            let report = SolveReport {
                converged: true,
                iterations: iter,
                final_residual: res,
                residual_history: history,
                cg_iterations_total: cg_total,
            };
            return finish(problem, psi, kappa, report);
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
        let omega = params.omega;
        for i in 0..n1 {
            for j in 0..n2 {
                psi[[i, j]] = (1.0 - omega) * psi[[i, j]] + omega * alpha * w[[i, j]];
            }
        }
    }
    Err(Error::Stagnation {
        iterations: params.max_iter,
        residual: *history.last().unwrap_or(&f64::INFINITY),
        best,
        history,
    })
}

fn solve_matched(
    problem: &FreeBoundaryProblem,
    kappa_target: f64,
    amplitude_guess: f64,
) -> Result<VortexSolution> {
    let rel_tol = (10.0 * problem.solver.tol).max(1e-10);
    let y_target = kappa_target.ln();
    let mut seed = problem.seed_array();

    let eval = |a: f64, seed: &Array2<f64>| -> Result<VortexSolution> {
        solve_fixed_amplitude(problem, a, seed)
    };

    let mut x = amplitude_guess.ln();
    let mut sol = eval(amplitude_guess, &seed)?;
    let mut y = sol.coefficient.ln();
    seed = sol.perturbation.values.clone();
    if (y - y_target).abs() <= rel_tol {
        return Ok(sol);
    }
    // The coefficient scales like amplitude^(-2) along the branch for the
    // quadratic-well case, which seeds the secant with slope -2.
    let mut x_prev = x;
    let mut y_prev = y;
    x += (y - y_target) / 2.0;
    for _ in 0..16 {
        sol = eval(x.exp(), &seed)?;
        y = sol.coefficient.ln();
        seed = sol.perturbation.values.clone();
        if (y - y_target).abs() <= rel_tol {
            return Ok(sol);
        }
        let dy = y - y_prev;
        if dy.abs() < 1e-15 {
            break;
        }
        let x_next = x - (y - y_target) * (x - x_prev) / dy;
        x_prev = x;
        y_prev = y;
        x = x_next;
        if !x.is_finite() {
            break;
        }
    }
    Err(Error::CoefficientMatch {
        achieved: y.exp(),
        target: kappa_target,
    })
}

/// Velocity field and factor of a vortex solution, through the matching
/// stream-function reconstruction. Ring grids touching the axis are cropped
/// to r > 0 first.
pub fn field_from_vortex(
    problem: &FreeBoundaryProblem,
    solution: &VortexSolution,
) -> Result<(SymmetricVectorField, Factor)> {
    let stream = vortex_stream_profile(problem.exponent, solution.coefficient)?;
    match problem.kind {
        VortexKind::Pair => reconstruct_translational(&solution.psi, &stream),
        VortexKind::Ring => {
            let psi = &solution.psi;
            if psi.origin[0] > 0.0 {
                return reconstruct_rotational(psi, &stream);
            }
            let [n1, n2] = psi.shape();
            let cropped = ScalarChartField::new(
                ChartTag::MeridionalRz,
                [psi.origin[0] + psi.spacing[0], psi.origin[1]],
                psi.spacing,
                psi.values.slice(ndarray::s![1..n1, ..]).to_owned(),
                psi.name.clone(),
            )?;
            let _ = n2;
            reconstruct_rotational(&cropped, &stream)
        }
    }
}

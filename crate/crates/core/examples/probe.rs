//! Scratch calibration probe; not part of the test suite.

use beltrami_lab::chart::{ChartTag, ScalarChartField};
use beltrami_lab::generators::rotated_harmonic_field;
use beltrami_lab::gs::{GridGeom, SolverParams};
use beltrami_lab::levelset::{
    evolve_chart, AnalyticLevelField, ChartCase, ChartParams, GriddedLevelField,
};
use beltrami_lab::ops::{beltrami_residual, Factor, Wrap};
use beltrami_lab::profile::{ProfileTag, RadialProfile};
use beltrami_lab::pullback::{evolve_constrained, pullback_form, EvolutionPath};
use beltrami_lab::rigidity::reconstruction_error;
use beltrami_lab::vortex::{
    field_from_vortex, solve_free_boundary, BranchMode, FreeBoundaryProblem, SeedKind, VortexKind,
};
use ndarray::Array2;
use std::f64::consts::{PI, TAU};

fn main() {
    ring_recon();
    growth_retune();
    rotated_orders();
}

fn ring_recon() {
    println!("== ring reconstruction ladder ==");
    let shapes = [[41usize, 81usize], [81, 161], [161, 321]];
    let chart_res = [(17usize, 9usize), (33, 17), (65, 33)];
    let xi2: Vec<f64> = (0..4).map(|k| k as f64 * TAU / 4.0).collect();
    let mut errs = Vec::new();
    for (&shape, &(n_xi1, nt)) in shapes.iter().zip(chart_res.iter()) {
        let problem = FreeBoundaryProblem {
            kind: VortexKind::Ring,
            travel_speed: 1.0,
            flux_offset: 0.0,
            exponent: 1,
            domain: GridGeom::rect([0.0, -3.0], [3.0, 3.0], shape).unwrap(),
            seed: SeedKind::Core { center: [1.2, 0.0], radius: 0.8, amplitude: 2.0 },
            branch: BranchMode::FixAmplitude { target: 2.0 },
            solver: SolverParams { tol: 1e-9, cg_tol: 1e-11, ..Default::default() },
        };
        let sol = solve_free_boundary(&problem).unwrap();
        let (u, _) = field_from_vortex(&problem, &sol).unwrap();
        let lf = GriddedLevelField::new(sol.psi.clone()).unwrap();
        let chart =
            evolve_chart(&lf, 0.35, &ChartParams::new(0.30, n_xi1, nt).with_substeps(2)).unwrap();
        let form = pullback_form(&u, &chart, &xi2, 0.1).unwrap();
        let err = reconstruction_error(&u, &form, &chart).unwrap();
        println!("shape {shape:?}: tangency {:.3e} recon err {err:.4e}", form.tangency_defect);
        errs.push(err);
    }
    for pair in errs.windows(2) {
        println!("recon order {:.2}", (pair[0] / pair[1]).log2());
    }
}

fn growth_retune() {
    println!("== growth retune ==");
    let fx = AnalyticLevelField {
        case_: ChartCase::Cylinder,
        lo: [-1.0, -1.0],
        hi: [3.0, 1.0],
        value_fn: |p: [f64; 2]| p[0],
        gradient_fn: |_| [1.0, 0.0],
    };
    let chart_x = evolve_chart(&fx, 0.3, &ChartParams::new(2.0, 33, 81).with_substeps(2)).unwrap();
    let n1 = chart_x.n_xi1();
    for (n2, k2) in [(128usize, 32usize), (192, 48), (192, 64)] {
        let xi2: Vec<f64> = (0..n2).map(|k| k as f64 * TAU / n2 as f64).collect();
        let b1 = Array2::from_elem((n2, n1), 1.0);
        let mut b2 = Array2::from_elem((n2, n1), 0.0);
        for s2 in 0..n2 {
            for i in 0..n1 {
                let xi1 = chart_x.xi1[i];
                b2[[s2, i]] += 0.01 * (PI * xi1).cos() * (k2 as f64 * xi2[s2]).cos();
            }
        }
        let ev = evolve_constrained(&b1, &b2, &xi2, &chart_x, EvolutionPath::Case, 2).unwrap();
        let d0 = ev.drift[0];
        let dpeak = ev.drift.iter().cloned().fold(0.0f64, f64::max);
        println!("f=x1 n2 {n2} k2 {k2}: d0 {d0:.4e} peak {dpeak:.4e} ratio {:.2}", dpeak / d0);
    }

    let fr = AnalyticLevelField {
        case_: ChartCase::Revolution,
        lo: [0.2, -1.0],
        hi: [5.8, 1.0],
        value_fn: |p: [f64; 2]| p[0],
        gradient_fn: |_| [1.0, 0.0],
    };
    let chart_r = evolve_chart(&fr, 0.5, &ChartParams::new(4.5, 33, 91).with_substeps(2)).unwrap();
    let n1r = chart_r.n_xi1();
    for (n2, k2) in [(192usize, 48usize), (192, 64)] {
        let xi2: Vec<f64> = (0..n2).map(|k| k as f64 * TAU / n2 as f64).collect();
        let b1 = Array2::from_elem((n2, n1r), 0.8);
        let mut b2 = Array2::from_elem((n2, n1r), 0.3);
        for s2 in 0..n2 {
            for i in 0..n1r {
                let xi1 = chart_r.xi1[i];
                b2[[s2, i]] += 0.01 * (PI * xi1).cos() * (k2 as f64 * xi2[s2]).cos();
            }
        }
        let ev = evolve_constrained(&b1, &b2, &xi2, &chart_r, EvolutionPath::Case, 2).unwrap();
        let d0 = ev.drift[0];
        let dpeak = ev.drift.iter().cloned().fold(0.0f64, f64::max);
        println!("f=r n2 {n2} k2 {k2}: d0 {d0:.4e} peak {dpeak:.4e} ratio {:.2}", dpeak / d0);
    }
}

fn rotated_orders() {
    println!("== rotated harmonic orders, shifted ladder ==");
    let mut errs = Vec::new();
    for n in [33usize, 65, 129] {
        let factor = RadialProfile::tagged(
            ProfileTag::Linear { slope: 1.0, intercept: 0.0 },
            -1.3,
            1.3,
            401,
            "f",
        )
        .unwrap();
        let grid = |vf: fn(f64, f64) -> f64| {
            ScalarChartField::sample(
                ChartTag::CartesianXy,
                [-1.0, -1.0],
                [1.0, 1.0],
                [n, n],
                "v",
                vf,
            )
            .unwrap()
        };
        let u = rotated_harmonic_field(
            grid(|x1, _| x1),
            grid(|_, x2| -x2),
            factor.clone(),
            1e-10,
        )
        .unwrap();
        let (_, report) =
            beltrami_residual(&u, &Factor::AxialProfile(factor), Wrap::Clamped).unwrap();
        let e = report
            .entries
            .iter()
            .find(|e| e.name == "residual_total")
            .unwrap()
            .norm_inf;
        println!("n {n}: residual {e:.4e}");
        errs.push(e);
    }
    for pair in errs.windows(2) {
        println!("rotated order {:.2}", (pair[0] / pair[1]).log2());
    }
}

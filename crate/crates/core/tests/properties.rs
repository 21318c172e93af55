//! Structural properties that should hold for arbitrary data, not just
//! hand-picked fixtures: discrete vector identities, linearity, exact
//! serialization round-trips.

use beltrami_lab::chart::{ChartTag, ScalarChartField, ScalarGrid3};
use beltrami_lab::io;
use beltrami_lab::ops::{curl3, diff2_axis, divergence, ScalarField, Wrap};
use beltrami_lab::vector::SymmetricVectorField;
use ndarray::{Array2, Array3};
use proptest::prelude::*;

const N: usize = 8;

fn grid3(values: Vec<f64>, name: &str) -> ScalarGrid3 {
    let h = std::f64::consts::TAU / N as f64;
    ScalarGrid3 {
        origin: [0.0; 3],
        spacing: [h; 3],
        values: Array3::from_shape_vec((N, N, N), values).unwrap(),
        name: name.into(),
    }
}

fn full3d(c: [Vec<f64>; 3]) -> SymmetricVectorField {
    let [v1, v2, v3] = c;
    SymmetricVectorField::Full3d {
        u1: grid3(v1, "u1"),
        u2: grid3(v2, "u2"),
        u3: grid3(v3, "u3"),
    }
}

fn components(u: &SymmetricVectorField) -> [&Array3<f64>; 3] {
    match u {
        SymmetricVectorField::Full3d { u1, u2, u3 } => [&u1.values, &u2.values, &u3.values],
        _ => panic!("expected a 3d grid field"),
    }
}

fn bounded() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, N * N * N)
}

/// Finite doubles across the full exponent range, for bit-exactness tests.
fn wild() -> impl Strategy<Value = f64> {
    use proptest::num::f64::{NEGATIVE, POSITIVE, SUBNORMAL, ZERO};
    POSITIVE | NEGATIVE | ZERO | SUBNORMAL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Centered periodic difference operators commute, so the discrete
    // divergence of the discrete curl vanishes identically; only
    // floating-point noise remains.
    #[test]
    fn divergence_of_curl_is_roundoff(a in bounded(), b in bounded(), c in bounded()) {
        let u = full3d([a, b, c]);
        let w = curl3(&u, Wrap::Periodic).unwrap();
        let div = match divergence(&w, Wrap::Periodic).unwrap() {
            ScalarField::Grid3(g) => g,
            _ => unreachable!(),
        };
        let h = std::f64::consts::TAU / N as f64;
        let scale = components(&u)
            .iter()
            .flat_map(|v| v.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let bound = 1e-12 * scale / (h * h);
        let max = div.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max <= bound, "max {} exceeds roundoff bound {}", max, bound);
    }

    #[test]
    fn curl_and_divergence_are_linear(
        a in bounded(), b in bounded(), c in bounded(),
        d in bounded(), e in bounded(), f in bounded(),
        alpha in -3.0..3.0f64, beta in -3.0..3.0f64,
    ) {
        let u = full3d([a, b, c]);
        let v = full3d([d, e, f]);
        let cu = components(&u);
        let cv = components(&v);
        let mixed = full3d([0, 1, 2].map(|k| {
            (cu[k] * alpha + cv[k] * beta).into_raw_vec_and_offset().0
        }));

        let curl_mixed = curl3(&mixed, Wrap::Periodic).unwrap();
        let curl_u = curl3(&u, Wrap::Periodic).unwrap();
        let curl_v = curl3(&v, Wrap::Periodic).unwrap();
        let cm = components(&curl_mixed);
        let cu = components(&curl_u);
        let cv = components(&curl_v);
        let h = std::f64::consts::TAU / N as f64;
        let tol = 1e-11 / h;
        for k in 0..3 {
            let recombined = cu[k] * alpha + cv[k] * beta;
            let diff = (cm[k] - &recombined)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(diff <= tol, "component {}: {} > {}", k, diff, tol);
        }
    }

    // Centered periodic differencing is antisymmetric: summation by parts
    // holds with no boundary term.
    #[test]
    fn summation_by_parts_on_periodic_grids(
        f in prop::collection::vec(-10.0..10.0f64, N * N),
        g in prop::collection::vec(-10.0..10.0f64, N * N),
    ) {
        let f = Array2::from_shape_vec((N, N), f).unwrap();
        let g = Array2::from_shape_vec((N, N), g).unwrap();
        let h = 0.37;
        for axis in [0, 1] {
            let df = diff2_axis(&f, axis, h, Wrap::Periodic);
            let dg = diff2_axis(&g, axis, h, Wrap::Periodic);
            let lhs: f64 = (&df * &g).sum();
            let rhs: f64 = -(&f * &dg).sum();
            prop_assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())),
                "axis {}: {} vs {}", axis, lhs, rhs
            );
        }
    }

    #[test]
    fn scalar_chart_serialization_is_bit_exact(
        values in prop::collection::vec(wild(), 12),
        spacing1 in 1e-6..1e3f64,
        spacing2 in 1e-6..1e3f64,
    ) {
        let field = ScalarChartField::new(
            ChartTag::MeridionalRz,
            [0.25, -1.5],
            [spacing1, spacing2],
            Array2::from_shape_vec((4, 3), values).unwrap(),
            "w",
        ).unwrap();
        let text = io::scalar_chart_to_string(&field).unwrap();
        let back = io::scalar_chart_from_string(&text).unwrap();
        prop_assert_eq!(back.values.shape(), field.values.shape());
        for (x, y) in field.values.iter().zip(back.values.iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(field.spacing[0].to_bits(), back.spacing[0].to_bits());
        prop_assert_eq!(field.spacing[1].to_bits(), back.spacing[1].to_bits());
        // Serialization is canonical: a second pass is byte-identical.
        prop_assert_eq!(text, io::scalar_chart_to_string(&back).unwrap());
    }

    #[test]
    fn field_serialization_is_bit_exact(values in prop::collection::vec(wild(), 3 * 8)) {
        let h = 0.5;
        let comp = |k: usize| ScalarGrid3 {
            origin: [0.0; 3],
            spacing: [h; 3],
            values: Array3::from_shape_vec((2, 2, 2), values[8 * k..8 * (k + 1)].to_vec())
                .unwrap(),
            name: format!("u{}", k + 1),
        };
        let u = SymmetricVectorField::Full3d { u1: comp(0), u2: comp(1), u3: comp(2) };
        let text = io::field_to_string(&u).unwrap();
        let back = io::field_from_string(&text).unwrap();
        let cu = components(&u);
        let cb = components(&back);
        for k in 0..3 {
            for (x, y) in cu[k].iter().zip(cb[k].iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(text, io::field_to_string(&back).unwrap());
    }

    #[test]
    fn table_serialization_is_bit_exact(
        rows in prop::collection::vec(prop::collection::vec(wild(), 3), 1..20),
    ) {
        let mut table = io::Table::new(&["t", "x", "y"]);
        for row in &rows {
            table.push(row.clone()).unwrap();
        }
        table.set_meta("label", "random");
        let text = table.to_string().unwrap();
        let back = io::Table::from_string(&text).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (a, b) in rows.iter().zip(back.rows.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(text, back.to_string().unwrap());
    }
}

mod common;

use std::f64::consts::PI;

use common::*;
use ecl_core::calculus::{gamma2, generator, gradient, hessian, GeometryConfig};
use ecl_core::functionals::deficit;
use ecl_core::grid::{build_grid, integrate, normalize, GridSpec, Potential, ScalarField};
use ecl_core::semigroup::apply;
use proptest::prelude::*;

fn interior_max(grid: &ecl_core::grid::Grid, vals: impl Fn(usize) -> f64) -> f64 {
    (0..grid.node_count()).filter(|&i| grid.is_interior(i, 4)).map(vals).fold(0.0, f64::max)
}

/// Sum of a few Gaussians, smooth and negligible at the faces of `[-6, 6]`.
fn blob(c: &[(f64, f64, f64)]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| c.iter().map(|&(a, m, w)| a * (-(x[0] - m).powi(2) / (2.0 * w * w)).exp()).sum()
}

fn trig(c: &[(f64, f64)]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| c.iter().enumerate().map(|(k, &(a, b))| a * ((k + 1) as f64 * x[0]).cos() + b * ((k + 1) as f64 * x[0]).sin()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalize_is_idempotent(vals in prop::collection::vec(0.0f64..10.0, 33), bump_at in 0usize..33) {
        let g = build_grid(&GridSpec::box_1d(2.0, 33)).unwrap();
        let mut vals = vals;
        vals[bump_at] += 1.0;
        let once = normalize(&ScalarField::new(g.clone(), vals).unwrap()).unwrap();
        let twice = normalize(once.field()).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn integrate_is_linear(
        a in -5.0f64..5.0, b in -5.0f64..5.0,
        p in prop::collection::vec(-3.0f64..3.0, 64), q in prop::collection::vec(-3.0f64..3.0, 64),
    ) {
        let g = build_grid(&GridSpec::circle(2.0 * PI, 64, Potential::NegCos)).unwrap();
        let phi = ScalarField::new(g.clone(), p).unwrap();
        let psi = ScalarField::new(g.clone(), q).unwrap();
        let mix: Vec<f64> = phi.values().iter().zip(psi.values()).map(|(x, y)| a * x + b * y).collect();
        let lhs = integrate(&ScalarField::new(g.clone(), mix).unwrap());
        let rhs = a * integrate(&phi) + b * integrate(&psi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (a.abs() * phi.sup_norm() + b.abs() * psi.sup_norm()));
    }

    #[test]
    fn bochner_identity_flat(c in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.8f64..1.5), 1..4)) {
        let g = build_grid(&GridSpec::box_1d(6.0, 769)).unwrap();
        let geo = GeometryConfig::new(g.clone(), 1).unwrap();
        let phi = ScalarField::from_fn(&g, blob(&c)).unwrap();
        let g2 = gamma2(&phi, &geo).unwrap();
        let hs = hessian(&phi).hs_norm_sq();
        let err = interior_max(&g, |i| (g2.values()[i] - hs[i]).abs());
        prop_assert!(err <= 1e-4 * phi.sup_norm().max(1.0).powi(2), "err {err:e}");
    }

    #[test]
    fn trace_inequality_flat(c in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.8f64..1.5), 1..4)) {
        // pointwise 1e-6 needs h = 1/128: the stencil gap is O(h⁴)
        let g = build_grid(&GridSpec::box_1d(6.0, 1537)).unwrap();
        let geo = GeometryConfig::new(g.clone(), 1).unwrap();
        let phi = ScalarField::from_fn(&g, blob(&c)).unwrap();
        let g2 = gamma2(&phi, &geo).unwrap();
        let l = generator(&phi, &geo).unwrap();
        // one dimension with n = m = 1 is the equality case
        let gap = interior_max(&g, |i| (g2.values()[i] - l.values()[i].powi(2)).abs());
        prop_assert!(gap <= 1e-6 * phi.sup_norm().max(1.0).powi(2), "gap {gap:e}");
    }

    #[test]
    fn trace_inequality_2d(a in -1.0f64..1.0, b in -1.0f64..1.0, cx in -1.0f64..1.0, w in 1.0f64..1.6) {
        let spec = GridSpec {
            topology: ecl_core::grid::Topology::TruncatedBox,
            extents: vec![4.0, 4.0],
            points: vec![513, 513],
            potential: Potential::Zero,
            normalize_measure: false,
        };
        let g = build_grid(&spec).unwrap();
        let geo = GeometryConfig::new(g.clone(), 2).unwrap();
        let phi = ScalarField::from_fn(&g, |x| {
            ((x[0] - cx).powi(2) + x[1].powi(2)).mul_add(-1.0 / (2.0 * w * w), 0.0).exp() * (1.0 + a * x[0] + b * x[1])
        })
        .unwrap();
        let g2 = gamma2(&phi, &geo).unwrap();
        let l = generator(&phi, &geo).unwrap();
        for i in (0..g.node_count()).filter(|&i| g.is_interior(i, 4)) {
            prop_assert!(g2.values()[i] >= l.values()[i].powi(2) / 2.0 - 1e-6, "node {i} gap {:e}", g2.values()[i] - l.values()[i].powi(2) / 2.0);
        }
    }

    #[test]
    fn generalized_bochner_on_weighted_circle(c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4)) {
        let g = build_grid(&GridSpec::circle(2.0 * PI, 256, Potential::NegCos)).unwrap();
        let geo = GeometryConfig::new(g.clone(), 2).unwrap();
        let k = geo.curvature();
        let phi = ScalarField::from_fn(&g, trig(&c)).unwrap();
        let g2 = gamma2(&phi, &geo).unwrap();
        let l = generator(&phi, &geo).unwrap();
        let grad = gradient(&phi).norm_sq();
        for i in 0..g.node_count() {
            let rhs = k * grad[i] + l.values()[i].powi(2) / 2.0;
            prop_assert!(g2.values()[i] >= rhs - 1e-4, "node {i}: {} < {rhs}", g2.values()[i]);
        }
    }

    #[test]
    fn generator_is_self_adjoint(c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
                                  d in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4)) {
        let g = build_grid(&GridSpec::circle(2.0 * PI, 256, Potential::NegCos)).unwrap();
        let geo = GeometryConfig::new(g.clone(), 2).unwrap();
        let phi = ScalarField::from_fn(&g, trig(&c)).unwrap();
        let psi = ScalarField::from_fn(&g, trig(&d)).unwrap();
        let l = generator(&phi, &geo).unwrap();
        let lp: Vec<f64> = l.values().iter().zip(psi.values()).map(|(a, b)| a * b).collect();
        let gp = gradient(&phi);
        let gq = gradient(&psi);
        let dot: Vec<f64> = gp.component(0).iter().zip(gq.component(0)).map(|(a, b)| a * b).collect();
        let total = g.integrate_values(&lp) + g.integrate_values(&dot);
        prop_assert!(total.abs() <= 1e-6, "{total:e}");
    }

    #[test]
    fn semigroup_preserves_positivity(vals in prop::collection::vec(0.0f64..1.0, 128), t in 0.01f64..3.0) {
        let ops = [circle_op(128, Potential::NegCos, 2), circle_op(128, Potential::Zero, 1)];
        for op in &ops {
            let phi = ScalarField::new(op.grid().clone(), vals.clone()).unwrap();
            let out = apply(op, &phi, t).unwrap();
            prop_assert!(out.values().iter().all(|&v| v >= -1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn deficit_components_nonnegative(c0 in -3.0f64..-1.0, c1 in 1.0f64..3.0, w0 in 1.2f64..2.0, w1 in 1.2f64..2.0,
                                      horizon in 0.5f64..2.0, frac in 0.2f64..0.8) {
        let op = box_op(8.0, 513);
        let g = op.grid().clone();
        let dec = solve(&op, &bump(&g, c0, w0), &bump(&g, c1, w1), horizon);
        let d = deficit(&dec, frac * horizon).unwrap();
        prop_assert!(d.a1 >= -1e-10 && d.a2 >= -1e-10 && d.cs_gap >= -1e-10, "{d:?}");
    }

    #[test]
    fn weighted_deficit_components_nonnegative(c0 in 0.5f64..2.5, c1 in 3.5f64..5.5, horizon in 0.5f64..2.0, frac in 0.2f64..0.8) {
        let op = circle_op(128, Potential::NegCos, 2);
        let g = op.grid().clone();
        let dec = solve(&op, &bump(&g, c0, 1.0), &bump(&g, c1, 1.0), horizon);
        let d = deficit(&dec, frac * horizon).unwrap();
        prop_assert!(d.a1 >= -1e-10 && d.a2 >= -1e-10 && d.cs_gap >= -1e-10, "{d:?}");
    }
}

#[test]
fn periodic_quadrature_order() {
    let exact = 2.0 * PI / 3f64.sqrt();
    let err = |points: usize| {
        let g = build_grid(&GridSpec::circle(2.0 * PI, points, Potential::Zero)).unwrap();
        (integrate(&ScalarField::from_fn(&g, |x| 1.0 / (2.0 - x[0].cos())).unwrap()) - exact).abs()
    };
    let (e16, e32) = (err(16), err(32));
    assert!(e16 > 0.0 && e32 * 4.0 <= e16, "{e16:e} {e32:e}");
}

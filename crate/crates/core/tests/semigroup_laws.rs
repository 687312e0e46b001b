mod common;

use common::*;
use ecl_core::calculus::generator;
use ecl_core::grid::{integrate, Potential, ScalarField};
use ecl_core::semigroup::{apply, mass_defect, Representation, SemigroupOperator};
use statrs::function::erf::erfc;

fn smooth_test_field(op: &SemigroupOperator) -> ScalarField {
    let g = op.grid();
    match g.topology {
        ecl_core::grid::Topology::TruncatedBox => {
            ScalarField::from_fn(g, |x| (-(x[0] - 0.5).powi(2)).exp() + 0.3 * (-(x[0] + 1.0).powi(2) / 0.5).exp())
                .unwrap()
        }
        ecl_core::grid::Topology::PeriodicCircle => {
            ScalarField::from_fn(g, |x| 1.0 + x[0].sin() + 0.5 * (2.0 * x[0]).cos() + 0.2 * (3.0 * x[0]).sin()).unwrap()
        }
    }
}

fn operators() -> Vec<std::sync::Arc<SemigroupOperator>> {
    vec![box_op(8.0, 513), circle_op(128, Potential::NegCos, 2), circle_op(128, Potential::Zero, 1)]
}

#[test]
fn semigroup_law() {
    for op in operators() {
        let phi = smooth_test_field(&op);
        let scale = phi.sup_norm();
        for &s in &[0.1, 0.5, 1.0] {
            for &t in &[0.1, 0.5, 1.0] {
                let two = apply(&op, &apply(&op, &phi, s).unwrap(), t).unwrap();
                let one = apply(&op, &phi, s + t).unwrap();
                let err = sup_diff(two.values(), one.values());
                assert!(err <= 1e-8 * scale, "s={s} t={t} err={err:e}");
            }
        }
    }
}

#[test]
fn positivity_of_nonnegative_data() {
    for op in operators() {
        let g = op.grid();
        // an indicator is the least smooth nonnegative input
        let phi = ScalarField::from_fn(g, |x| if (x[0] - 1.0).abs() < 0.7 { 1.0 } else { 0.0 }).unwrap();
        // the truncated Fourier series of an unresolved kernel oscillates, so
        // spectral positivity only holds once e^{-k²t} decays by the Nyquist mode
        let times: &[f64] = match op.representation() {
            Representation::GaussianKernel => &[1e-4, 1e-3, 0.1, 1.0, 5.0],
            Representation::Spectral => &[0.01, 0.1, 1.0, 5.0],
        };
        for &t in times {
            let out = apply(&op, &phi, t).unwrap();
            let min = out.values().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-12, "t={t} min={min:e}");
        }
    }
}

#[test]
fn mass_conservation() {
    for op in operators() {
        let phi = smooth_test_field(&op);
        let abs = ScalarField::new(op.grid().clone(), phi.values().iter().map(|v| v.abs()).collect()).unwrap();
        let scale = integrate(&abs);
        for &t in &[0.1, 0.5, 1.0] {
            let moved = apply(&op, &phi, t).unwrap();
            assert!((integrate(&moved) - integrate(&phi)).abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn generator_consistency_first_order_in_time() {
    for op in operators() {
        let phi = smooth_test_field(&op);
        let lphi = generator(&phi, op.geometry()).unwrap();
        let g = op.grid().clone();
        let err = |d: f64| {
            let moved = apply(&op, &phi, d).unwrap();
            (0..g.node_count())
                .filter(|&i| g.is_interior(i, 2))
                .map(|i| ((moved.values()[i] - phi.values()[i]) / d - lphi.values()[i]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn mass_defect_matches_gaussian_tail() {
    let op = box_op(8.0, 513);
    let u = gaussian(op.grid(), 0.0, 1.0);
    for &t in &[0.1f64, 0.25, 1.0, 5.0, 20.0] {
        let expected = erfc(8.0 / (2.0 * (1.0 + 2.0 * t)).sqrt());
        let got = mass_defect(&op, &u, t).unwrap();
        assert!((got - expected).abs() <= 1e-2 * expected + 1e-14, "t={t} got={got:e} expected={expected:e}");
    }
    assert!(mass_defect(&op, &u, 0.25).unwrap() < 1e-8);
    assert!(mass_defect(&op, &u, 20.0).unwrap() > 1e-3);
}

#[test]
fn mass_defect_vanishes_on_circles() {
    for pot in [Potential::Zero, Potential::NegCos] {
        let op = circle_op(256, pot, 2);
        let u = bump(op.grid(), 1.0, 1.0);
        for &t in &[0.1, 1.0, 10.0] {
            let d = mass_defect(&op, &u, t).unwrap();
            assert!(d < 1e-12, "t={t} defect={d:e}");
        }
    }
}

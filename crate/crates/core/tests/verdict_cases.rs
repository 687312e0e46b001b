mod common;

use std::f64::consts::{E, PI};

use common::*;
use ecl_core::grid::Potential;
use ecl_core::verdict::{
    build_curve, check_costa_reduction, check_euclidean, check_weighted, equality_diagnostic, CurveReport, Verdict,
};

fn assert_curve_invariants(c: &CurveReport) {
    assert!(c.times.windows(2).all(|w| w[0] < w[1]));
    assert!(c.functionals.iter().all(|f| f.entropy_power > 0.0));
    for i in 0..c.times.len() {
        let (fd, an) = (c.d2n_fd[i], c.d2n_analytic[i]);
        if fd.is_nan() {
            continue;
        }
        assert!((fd - an).abs() <= 1e-3f64.max(1e-2 * an.abs()), "t={} fd={fd} analytic={an}", c.times[i]);
    }
}

fn assert_forms_agree(c: &CurveReport) {
    let n = c.n as f64;
    for (i, d) in c.deficits.iter().enumerate() {
        let scaled = n / (2.0 * c.functionals[i].entropy_power) * c.margin[i];
        let scale = scaled.abs().max(d.lhs_alternative.abs()).max(1e-300);
        assert!((scaled - d.lhs_alternative).abs() <= 1e-8 * scale);
        assert!(scaled.signum() == d.lhs_alternative.signum() || scale < 1e-12);
    }
}

#[test]
fn gaussian_heat_flow_curve() {
    let op = box_op(12.0, 769);
    let g = op.grid().clone();
    let u = gaussian(&g, 0.0, 1.0);
    let dec = solve(&op, &u, &heat(&op, &u, 1.0), 1.0);
    let c = build_curve(&dec, 63).unwrap();
    let n0 = 2.0 * PI * E;
    for (t, f) in c.times.iter().zip(&c.functionals) {
        let exact = n0 * (1.0 + 2.0 * t);
        assert!((f.entropy_power - exact).abs() <= 1e-4 * exact);
    }
    assert!(c.d2n_analytic.iter().all(|d| d.abs() <= 1e-3 * n0));
    assert!(c.energy_drift() <= 1e-4);
    assert_curve_invariants(&c);
    let check = check_euclidean(&c, None).unwrap();
    assert_ne!(check.verdict, Verdict::Fail);
    assert!(check.min_margin <= 1e-3 * n0);
}

#[test]
fn bump_bridge_passes_strictly() {
    let op = box_op(8.0, 513);
    let g = op.grid().clone();
    let dec = solve(&op, &bump(&g, -3.0, 2.0), &bump(&g, 3.0, 2.0), 1.0);
    let c = build_curve(&dec, 63).unwrap();
    assert_curve_invariants(&c);
    assert_forms_agree(&c);
    assert!(c.energy_drift() <= 1e-4);
    let check = check_euclidean(&c, None).unwrap();
    assert_eq!(check.verdict, Verdict::Pass);
    assert!(check.min_margin > 0.0);
    assert!(check_weighted(&c, 0.0, None).is_err());
}

#[test]
fn heat_of_bump_reduces_to_costa() {
    let op = box_op(8.0, 513);
    let g = op.grid().clone();
    let u = bump(&g, 0.5, 2.5);
    let dec = solve(&op, &u, &heat(&op, &u, 1.0), 1.0);
    let c = build_curve(&dec, 63).unwrap();
    assert!(c.bound.iter().all(|b| b.abs() <= 1e-5));
    let tol = c.default_tol_margin();
    assert!(c.d2n_analytic.iter().all(|&d| d <= tol));
    let check = check_costa_reduction(&c, 0.0, None).unwrap();
    assert_ne!(check.verdict, Verdict::Fail);
    assert!(check.max_abs_energy.unwrap() <= 1e-5);
}

#[test]
fn flat_circle_weighted_equals_euclidean() {
    let op = circle_op(256, Potential::Zero, 1);
    let g = op.grid().clone();
    let dec = solve(&op, &bump(&g, 1.5, 1.0), &bump(&g, 4.5, 1.0), 1.0);
    let c = build_curve(&dec, 31).unwrap();
    assert_eq!(c.k, 0.0);
    let e = check_euclidean(&c, None).unwrap();
    let w = check_weighted(&c, 0.0, None).unwrap();
    assert_eq!(e.verdict, w.verdict);
    assert_eq!(e.min_margin, w.min_margin);
    assert_eq!(e.verdict, Verdict::Pass);
}

#[test]
fn weighted_circle_checks() {
    let op = circle_op(256, Potential::NegCos, 2);
    let g = op.grid().clone();
    let k = op.geometry().curvature();
    assert!((k + 1.25).abs() < 1e-6);
    let mu = bump(&g, PI / 2.0, 1.0);
    let generic = solve(&op, &mu, &bump(&g, 1.5 * PI, 1.0), 1.0);
    let c = build_curve(&generic, 63).unwrap();
    assert_curve_invariants(&c);
    assert_forms_agree(&c);
    assert_eq!(check_weighted(&c, k, None).unwrap().verdict, Verdict::Pass);
    assert!(check_euclidean(&c, None).is_err());

    let heat_dec = solve(&op, &mu, &heat(&op, &mu, 1.0), 1.0);
    let c = build_curve(&heat_dec, 63).unwrap();
    let costa = check_costa_reduction(&c, k, None).unwrap();
    assert_eq!(costa.verdict, Verdict::Pass);
    let n = c.n as f64;
    for (f, d) in c.functionals.iter().zip(&c.d2n_analytic) {
        assert!(*d <= -(4.0 * k / n) * f.entropy_power * f.fisher);
    }
}

#[test]
fn equality_diagnostics() {
    let op = box_op(8.0, 513);
    let g = op.grid().clone();
    let u = bump(&g, 0.0, 2.5);
    let v = heat(&op, &u, 1.0);
    let forward = equality_diagnostic(&solve(&op, &u, &v, 1.0), 0.5).unwrap();
    assert!(forward.r_g <= 1e-8 && forward.near_equality);
    let backward = equality_diagnostic(&solve(&op, &v, &u, 1.0), 0.5).unwrap();
    assert!(backward.r_f <= 1e-8 && backward.near_equality);
    let generic = equality_diagnostic(&solve(&op, &bump(&g, -3.0, 2.0), &bump(&g, 3.0, 2.0), 1.0), 0.5).unwrap();
    assert!(generic.r_f > 0.1 && generic.r_g > 0.1 && generic.cs_defect > 1e-2);
    assert!(!generic.near_equality);
}

#[test]
fn refinement_keeps_pass() {
    let run = |points: usize, samples: usize| {
        let op = box_op(8.0, points);
        let g = op.grid().clone();
        let dec = solve(&op, &bump(&g, -2.5, 2.0), &bump(&g, 2.0, 1.5), 1.0);
        check_euclidean(&build_curve(&dec, samples).unwrap(), None).unwrap().verdict
    };
    assert_eq!(run(257, 31), Verdict::Pass);
    assert_eq!(run(513, 63), Verdict::Pass);
}

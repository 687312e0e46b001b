#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use ecl_core::bridge::{solve_schrodinger, Decomposition, SolverConfig};
use ecl_core::calculus::GeometryConfig;
use ecl_core::grid::{build_grid, normalize, DensityField, Grid, GridSpec, Potential, ScalarField};
use ecl_core::semigroup::{build_semigroup, SemigroupOperator};

pub fn operator(spec: &GridSpec, n: usize) -> Arc<SemigroupOperator> {
    let grid = build_grid(spec).unwrap();
    let geo = GeometryConfig::new(grid, n).unwrap();
    Arc::new(build_semigroup(&geo).unwrap())
}

pub fn box_op(l: f64, points: usize) -> Arc<SemigroupOperator> {
    operator(&GridSpec::box_1d(l, points), 1)
}

pub fn circle_op(points: usize, potential: Potential, n: usize) -> Arc<SemigroupOperator> {
    operator(&GridSpec::circle(2.0 * PI, points, potential), n)
}

pub fn density(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> DensityField {
    normalize(&ScalarField::from_fn(grid, f).unwrap()).unwrap()
}

/// `exp(-1/(1-r²))` around `c` with radius `w`, wrapped on circles.
pub fn bump(grid: &Arc<Grid>, c: f64, w: f64) -> DensityField {
    let axis = grid.axes[0].clone();
    density(grid, move |x| {
        let r2 = (axis.displacement(x[0], c) / w).powi(2);
        if r2 < 1.0 {
            (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    })
}

pub fn gaussian(grid: &Arc<Grid>, mean: f64, var: f64) -> DensityField {
    density(grid, |x| (-(x[0] - mean).powi(2) / (2.0 * var)).exp())
}

pub fn heat(op: &SemigroupOperator, u: &DensityField, t: f64) -> DensityField {
    let moved = op.propagator(t).unwrap().apply_values(u.values());
    let clipped: Vec<f64> = moved.into_iter().map(|v| v.max(0.0)).collect();
    normalize(&ScalarField::new(op.grid().clone(), clipped).unwrap()).unwrap()
}

pub fn solve(op: &Arc<SemigroupOperator>, u: &DensityField, v: &DensityField, horizon: f64) -> Decomposition {
    solve_schrodinger(op, u, v, horizon, &SolverConfig::default()).unwrap()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sup(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

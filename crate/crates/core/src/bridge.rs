//! Schrödinger system `u = f·P_T g`, `v = g·P_T f` and the interpolation
//! `ρ_t = P_t f · P_{T-t} g`.

use std::sync::Arc;

use crate::calculus::{diff_axis, gradient, GeometryConfig, VectorField};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid, ScalarField};
use crate::semigroup::SemigroupOperator;

/// Nodes with `ρ ≤ DENSITY_FLOOR·max ρ` are left out of every integral.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Smallest denominator used in the fixed-point updates.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// L¹(m) marginal error at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Constant value of the initial `g`.
    pub initial_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: 10_000, initial_scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// `∫ g dm = 1`
    UnitMassG,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub f: ScalarField,
    pub g: ScalarField,
    pub horizon: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Marginal residual after each iteration.
    pub trace: Vec<f64>,
    pub gauge: Gauge,
    semigroup: Arc<SemigroupOperator>,
}

impl Decomposition {
    pub fn semigroup(&self) -> &Arc<SemigroupOperator> {
        &self.semigroup
    }

    pub fn geometry(&self) -> &GeometryConfig {
        self.semigroup.geometry()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.semigroup.grid()
    }
}

fn l1_error(grid: &Grid, a: &[f64], b: &[f64], target: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(target)
        .zip(&grid.weights)
        .map(|(((x, y), t), w)| (x * y - t).abs() * w)
        .sum()
}

fn fit(target: &[f64], denom: &[f64]) -> Vec<f64> {
    target
        .iter()
        .zip(denom)
        .map(|(&t, &d)| if t == 0.0 { 0.0 } else { t / d.max(DENOMINATOR_FLOOR) })
        .collect()
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Alternating marginal fitting started from a constant `g`.
pub fn solve_schrodinger(
    op: &Arc<SemigroupOperator>,
    u: &DensityField,
    v: &DensityField,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<Decomposition> {
    let grid = op.grid().clone();
    if !same_grid(u.grid(), &grid) || !same_grid(v.grid(), &grid) {
        return Err(Error::InvalidArgument("marginals and semigroup use different grids".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 || !(cfg.initial_scale > 0.0) {
        return Err(Error::InvalidArgument("solver tolerance, budget and scale must be positive".into()));
    }
    let prop = op.propagator(horizon)?;
    let (u, v) = (u.values(), v.values());
    let mut g = vec![cfg.initial_scale; grid.node_count()];
    let mut pg = prop.apply_values(&g);
    let mut f;
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        f = fit(u, &pg);
        let pf = prop.apply_values(&f);
        g = fit(v, &pf);
        pg = prop.apply_values(&g);
        let finite = f.iter().chain(&g).chain(&pg).all(|x| x.is_finite());
        if !finite {
            return Err(Error::NumericalFailure { iteration });
        }
        let residual = l1_error(&grid, &f, &pg, u).max(l1_error(&grid, &g, &pf, v));
        trace.push(residual);
        if residual <= cfg.tol {
            break;
        }
        if iteration >= cfg.max_iter {
            return Err(Error::NonConvergence { iterations: iteration, residual, trace });
        }
    }
    let c = grid.integrate_values(&g);
    if !(c > 0.0) {
        return Err(Error::NumericalFailure { iteration });
    }
    for x in g.iter_mut() {
        *x /= c;
    }
    for x in f.iter_mut() {
        *x *= c;
    }
    Ok(Decomposition {
        f: ScalarField::new(grid.clone(), f)?,
        g: ScalarField::new(grid, g)?,
        horizon,
        iterations: iteration,
        residual: *trace.last().expect("at least one iteration"),
        trace,
        gauge: Gauge::UnitMassG,
        semigroup: op.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct InterpolationSample {
    pub t: f64,
    pub rho: DensityField,
    pub theta: ScalarField,
    /// `∇θ`.
    pub velocity: VectorField,
    pub pt_f: ScalarField,
    pub ptt_g: ScalarField,
    /// Nodes above the density floor.
    pub support: Vec<bool>,
    /// `log ρ`, clamped at the smallest positive float.
    pub log_rho: Vec<f64>,
    /// `∫ P_t f · P_{T-t} g dm` before renormalization.
    pub raw_mass: f64,
}

fn safe_ln(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE).ln()
}

/// Mask of nodes with `ρ > DENSITY_FLOOR·max ρ`.
pub fn support_mask(rho: &[f64]) -> Vec<bool> {
    let max = rho.iter().cloned().fold(0.0, f64::max);
    rho.iter().map(|&r| r > DENSITY_FLOOR * max).collect()
}

pub fn interpolate(dec: &Decomposition, t: f64) -> Result<InterpolationSample> {
    let horizon = dec.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, {horizon}]")));
    }
    let op = &dec.semigroup;
    let grid = op.grid();
    let pt_f = op.propagator(t)?.apply(&dec.f)?;
    let ptt_g = op.propagator(horizon - t)?.apply(&dec.g)?;
    // spectral round-off may leave values of order -1e-17 far from the mass
    let raw: Vec<f64> =
        pt_f.values().iter().zip(ptt_g.values()).map(|(a, b)| (a * b).max(0.0)).collect();
    let raw_mass = grid.integrate_values(&raw);
    if !(raw_mass > 0.0 && raw_mass.is_finite()) {
        return Err(Error::NumericalFailure { iteration: 0 });
    }
    let rho: Vec<f64> = raw.iter().map(|r| r / raw_mass).collect();
    let support = support_mask(&rho);
    let log_rho = rho.iter().map(|&r| safe_ln(r)).collect();
    let theta: Vec<f64> = ptt_g
        .values()
        .iter()
        .zip(pt_f.values())
        .map(|(&b, &a)| safe_ln(b) - safe_ln(a))
        .collect();
    let theta = ScalarField::new(grid.clone(), theta)?;
    let velocity = gradient(&theta);
    Ok(InterpolationSample {
        t,
        rho: DensityField::new(ScalarField::new(grid.clone(), rho)?)?,
        theta,
        velocity,
        pt_f,
        ptt_g,
        support,
        log_rho,
        raw_mass,
    })
}

/// `‖∂_t ρ + div_m(ρ ∇θ)‖_{L¹(m)}` with a centred time difference, where
/// `div_m X = div X - ⟨∇V, X⟩`.
pub fn continuity_residual(dec: &Decomposition, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    if t - dt < 0.0 || t + dt > dec.horizon {
        return Err(Error::InvalidArgument(format!("t ± dt leaves [0, {}]", dec.horizon)));
    }
    let plus = interpolate(dec, t + dt)?;
    let minus = interpolate(dec, t - dt)?;
    let mid = interpolate(dec, t)?;
    let grid = dec.grid();
    let geo = dec.geometry();
    let rho = mid.rho.values();
    let mut div = vec![0.0; grid.node_count()];
    for a in 0..grid.dimension() {
        let flux: Vec<f64> = mid.velocity.component(a).iter().zip(rho).map(|(v, r)| v * r).collect();
        let d = diff_axis(grid, &flux, a);
        for (((o, x), gv), fl) in div.iter_mut().zip(&d).zip(&geo.grad_potential()[a]).zip(&flux) {
            *o += x - gv * fl;
        }
    }
    let res = plus
        .rho
        .values()
        .iter()
        .zip(minus.rho.values())
        .zip(&div)
        .zip(&grid.weights)
        .map(|(((p, m), d), w)| ((p - m) / (2.0 * dt) + d).abs() * w)
        .sum();
    Ok(res)
}

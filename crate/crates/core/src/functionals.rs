//! Entropy, entropy power, Fisher information, kinetic and total energy,
//! the entropy derivatives and the deficit decomposition of the concavity
//! gap. Logarithms are natural.
//!
//! All integrals of one sample share a single support mask, so identities
//! between them hold on the grid and not only in the limit.

use crate::bridge::{interpolate, support_mask, Decomposition, InterpolationSample};
use crate::calculus::{
    gamma2_from_grad, gradient_values, hessian_from_grad, pointwise_dot, GeometryConfig,
};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalReport {
    pub t: f64,
    pub entropy: f64,
    pub entropy_power: f64,
    pub fisher: f64,
    pub kinetic: f64,
    pub energy: f64,
    pub d_entropy: f64,
    pub d2_entropy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeficitReport {
    pub t: f64,
    pub lambda_star: f64,
    pub eta_star: f64,
    pub a1: f64,
    pub a2: f64,
    pub cs_gap: f64,
    pub lhs_alternative: f64,
}

impl DeficitReport {
    pub fn decomposition_sum(&self) -> f64 {
        self.a1 + self.a2 + self.cs_gap
    }

    /// `|lhs - (A1 + A2 + cs_gap)|` relative to the larger side.
    pub fn identity_residual(&self) -> f64 {
        let sum = self.decomposition_sum();
        let scale = self.lhs_alternative.abs().max(sum.abs()).max(f64::MIN_POSITIVE);
        (self.lhs_alternative - sum).abs() / scale
    }
}

/// Weighted sum over the mask: `Σ_{mask} w ρ φ`.
fn masked_mean(grid: &Grid, rho: &[f64], mask: &[bool], phi: &[f64]) -> f64 {
    grid.weights
        .iter()
        .zip(rho)
        .zip(mask)
        .zip(phi)
        .filter(|(((_, _), m), _)| **m)
        .map(|(((w, r), _), p)| w * r * p)
        .sum()
}

fn log_values(rho: &[f64]) -> Vec<f64> {
    rho.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect()
}

/// `-∫ ρ log ρ dm`.
pub fn entropy(rho: &DensityField) -> f64 {
    let v = rho.values();
    let mask = support_mask(v);
    -masked_mean(rho.grid(), v, &mask, &log_values(v))
}

/// `exp(2H/n)`.
pub fn entropy_power(rho: &DensityField, n: usize) -> f64 {
    (2.0 * entropy(rho) / n as f64).exp()
}

/// `∫ |∇ log ρ|² ρ dm`.
pub fn fisher(rho: &DensityField) -> f64 {
    let v = rho.values();
    let mask = support_mask(v);
    let grad = gradient_values(rho.grid(), &log_values(v));
    masked_mean(rho.grid(), v, &mask, &pointwise_dot(&grad, &grad))
}

/// `∫ |∇θ|² ρ dm`.
pub fn kinetic(sample: &InterpolationSample) -> f64 {
    let grid = sample.rho.grid();
    masked_mean(grid, sample.rho.values(), &sample.support, &sample.velocity.norm_sq())
}

/// All functionals and the deficit terms of one sample.
pub fn analyze_sample(
    sample: &InterpolationSample,
    geo: &GeometryConfig,
) -> Result<(FunctionalReport, DeficitReport)> {
    let grid = geo.grid();
    let n = geo.n() as f64;
    let k = geo.curvature();
    let rho = sample.rho.values();
    let mask = &sample.support;
    let mean = |phi: &[f64]| masked_mean(grid, rho, mask, phi);

    let grad_t = sample.velocity.components();
    let grad_l = gradient_values(grid, &sample.log_rho);
    let entropy = -mean(&sample.log_rho);
    let entropy_power = (2.0 * entropy / n).exp();
    let fisher = mean(&pointwise_dot(&grad_l, &grad_l));
    let kinetic = mean(&pointwise_dot(grad_t, grad_t));
    let cross = mean(&pointwise_dot(&grad_l, grad_t));
    let energy = 0.5 * (kinetic - fisher);

    let (g2_t, l_t) = gamma2_from_grad(geo, grad_t);
    let (g2_l, l_l) = gamma2_from_grad(geo, &grad_l);
    let int_g2_t = mean(&g2_t);
    let int_g2_l = mean(&g2_l);
    let d_entropy = -cross;
    let d2_entropy = -(int_g2_t + int_g2_l);

    let lambda_star = cross / n;
    let eta_star = fisher / n;
    let (a1, a2) = if geo.is_euclidean() {
        let h_t = hessian_from_grad(grid, grad_t);
        let h_l = hessian_from_grad(grid, &grad_l);
        (mean(&h_t.shifted_hs_sq(lambda_star)), mean(&h_l.shifted_hs_sq(eta_star)))
    } else {
        // Bochner remainder Γ₂ - K|∇φ|² - (Lφ)²/n integrated, plus the
        // variance of Lφ; reduces to the Hessian form on flat space
        let a1 = int_g2_t - k * kinetic - mean(&l_t).powi(2) / n;
        let a2 = int_g2_l - k * fisher - mean(&l_l).powi(2) / n;
        (a1, a2)
    };
    let cs_gap = (2.0 / n) * fisher * energy - cross * cross / n + fisher * fisher / n;
    let lhs_alternative = int_g2_t + int_g2_l - (2.0 / n) * cross * cross
        + (2.0 / n) * fisher * energy
        - k * (kinetic + fisher);

    let fr = FunctionalReport {
        t: sample.t,
        entropy,
        entropy_power,
        fisher,
        kinetic,
        energy,
        d_entropy,
        d2_entropy,
    };
    let dr = DeficitReport { t: sample.t, lambda_star, eta_star, a1, a2, cs_gap, lhs_alternative };
    let finite = [entropy, entropy_power, fisher, kinetic, d_entropy, d2_entropy, a1, a2, cs_gap]
        .iter()
        .all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite(format!("functionals at t = {}", sample.t)));
    }
    Ok((fr, dr))
}

fn sample_reports(dec: &Decomposition, t: f64) -> Result<(FunctionalReport, DeficitReport)> {
    if !(t > 0.0 && t < dec.horizon) {
        return Err(Error::InvalidArgument(format!("t = {t} must lie in (0, {})", dec.horizon)));
    }
    let s = interpolate(dec, t)?;
    analyze_sample(&s, dec.geometry())
}

/// `(kinetic - I)/2` at time `t`.
pub fn energy(dec: &Decomposition, t: f64) -> Result<f64> {
    Ok(sample_reports(dec, t)?.0.energy)
}

/// `(dH/dt, d²H/dt²)` from the integral formulas.
pub fn entropy_derivatives(dec: &Decomposition, t: f64) -> Result<(f64, f64)> {
    let fr = sample_reports(dec, t)?.0;
    Ok((fr.d_entropy, fr.d2_entropy))
}

pub fn deficit(dec: &Decomposition, t: f64) -> Result<DeficitReport> {
    Ok(sample_reports(dec, t)?.1)
}

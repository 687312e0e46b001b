//! Closed-form references for isotropic Gaussians and the centred 1D
//! Gaussian bridge. Nothing here touches the grid solvers.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    /// Isotropic variance `σ²`.
    pub variance: f64,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance {variance} must be positive")));
        }
        Ok(GaussianState { mean, variance })
    }

    pub fn centered(dim: usize, variance: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], variance)
    }

    /// Lebesgue density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let r2: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).powf(d / 2.0)
    }
}

/// `(H, N, I)` for an isotropic Gaussian in dimension `n`.
pub fn gaussian_functionals(gs: &GaussianState, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let h = 0.5 * nf * (2.0 * PI * E * gs.variance).ln();
    let big_n = 2.0 * PI * E * gs.variance;
    let i = nf / gs.variance;
    (h, big_n, i)
}

/// Heat flow with the `e^{tΔ}` normalization: variance grows by `2t`.
pub fn gaussian_heat(gs: &GaussianState, t: f64) -> GaussianState {
    GaussianState { mean: gs.mean.clone(), variance: gs.variance + 2.0 * t }
}

/// Centred 1D bridge with `f = e^{-a x²/2}` and `g = e^{-b x²/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBridge {
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub horizon: f64,
    pub a: f64,
    pub b: f64,
}

/// Solves for `(a, b)` by bisection on `b` over `(-1/(2T), ∞)`.
pub fn gaussian_bridge(sigma0_sq: f64, sigma1_sq: f64, horizon: f64) -> Result<GaussianBridge> {
    if !(sigma0_sq > 0.0 && sigma1_sq > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidArgument("variances and horizon must be positive".into()));
    }
    let t = horizon;
    let p0 = 1.0 / sigma0_sq;
    let p1 = 1.0 / sigma1_sq;
    let a_of = |b: f64| p0 - b / (1.0 + 2.0 * t * b);
    let resid = |b: f64| {
        let a = a_of(b);
        b + a / (1.0 + 2.0 * t * a) - p1
    };
    let mut lo = -1.0 / (2.0 * t) * (1.0 - 1e-12);
    let mut hi = 1.0;
    if resid(lo) >= 0.0 {
        return Err(Error::NonConvergence { iterations: 0, residual: resid(lo), trace: vec![] });
    }
    let mut grow = 0;
    while resid(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NonConvergence { iterations: grow, residual: resid(hi), trace: vec![] });
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if resid(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let b = 0.5 * (lo + hi);
    let a = a_of(b);
    if resid(b).abs() > 1e-12 {
        return Err(Error::NonConvergence { iterations: 400, residual: resid(b), trace: vec![] });
    }
    Ok(GaussianBridge { sigma0_sq, sigma1_sq, horizon, a, b })
}

impl GaussianBridge {
    /// Precision of `P_t f`.
    pub fn alpha(&self, t: f64) -> f64 {
        self.a / (1.0 + 2.0 * t * self.a)
    }

    /// Precision of `P_{T-t} g`.
    pub fn beta(&self, t: f64) -> f64 {
        self.b / (1.0 + 2.0 * (self.horizon - t) * self.b)
    }

    pub fn precision(&self, t: f64) -> f64 {
        self.alpha(t) + self.beta(t)
    }

    pub fn variance(&self, t: f64) -> f64 {
        1.0 / self.precision(t)
    }

    pub fn density(&self, t: f64, x: f64) -> f64 {
        let v = self.variance(t);
        (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    }

    /// `∇θ_t(x) = slope · x`.
    pub fn velocity_slope(&self, t: f64) -> f64 {
        -(self.beta(t) - self.alpha(t))
    }

    pub fn kinetic(&self, t: f64) -> f64 {
        self.velocity_slope(t).powi(2) * self.variance(t)
    }

    pub fn fisher(&self, t: f64) -> f64 {
        self.precision(t)
    }

    pub fn entropy(&self, t: f64) -> f64 {
        0.5 * (2.0 * PI * E * self.variance(t)).ln()
    }

    /// Total energy `(kinetic - I)/2`; independent of `t`.
    pub fn energy(&self) -> f64 {
        let t = 0.5 * self.horizon;
        0.5 * (self.kinetic(t) - self.fisher(t))
    }

    /// `(dH/dt, d²H/dt²)` in closed form.
    pub fn entropy_derivatives(&self, t: f64) -> (f64, f64) {
        let (al, be) = (self.alpha(t), self.beta(t));
        let p = al + be;
        let dp = -2.0 * al * al + 2.0 * be * be;
        let d2p = 8.0 * al.powi(3) + 8.0 * be.powi(3);
        (-dp / (2.0 * p), -(d2p * p - dp * dp) / (2.0 * p * p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functionals_examples() {
        let g = GaussianState::centered(1, 1.0).unwrap();
        let (h, n, i) = gaussian_functionals(&g, 1);
        assert!((h - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((n - 17.079_468_445_347_132).abs() < 1e-9);
        assert_eq!(i, 1.0);
        let g2 = GaussianState::centered(2, 1.0).unwrap();
        let (h2, n2, i2) = gaussian_functionals(&g2, 2);
        assert!((h2 - 2.0 * h).abs() < 1e-12);
        assert!((n2 - n).abs() < 1e-12);
        assert_eq!(i2, 2.0);
        let g3 = GaussianState::centered(1, 3.0).unwrap();
        let (_, n3, i3) = gaussian_functionals(&g3, 1);
        assert!((n3 / n - 3.0).abs() < 1e-12);
        assert!((i3 - 1.0 / 3.0).abs() < 1e-15);
        assert!(GaussianState::centered(1, 0.0).is_err());
    }

    #[test]
    fn heat_examples() {
        let g = GaussianState::centered(1, 1.0).unwrap();
        assert_eq!(gaussian_heat(&g, 0.5).variance, 2.0);
        assert_eq!(gaussian_heat(&g, 0.0), g);
        let ns: Vec<f64> =
            (0..3).map(|k| gaussian_functionals(&gaussian_heat(&g, k as f64), 1).1).collect();
        assert!((ns[0] - 2.0 * ns[1] + ns[2]).abs() < 1e-12);
    }

    #[test]
    fn bridge_heat_flow_case() {
        let br = gaussian_bridge(0.25, 2.25, 1.0).unwrap();
        assert!(br.b.abs() < 1e-12);
        assert!(br.energy().abs() < 1e-12);
        // regression value: ρ_{T/2} of pure heat flow, 0.25 + 2·0.5
        assert!((br.variance(0.5) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn bridge_symmetric_case() {
        let br = gaussian_bridge(1.0, 1.0, 1.0).unwrap();
        assert!((br.a - br.b).abs() < 1e-10);
        assert!((br.a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((br.energy() + 0.414_213_56).abs() < 1e-8);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert!((br.variance(t) - br.variance(1.0 - t)).abs() < 1e-12);
        }
        assert!((br.variance(0.5) - 1.207_106_78).abs() < 1e-8);
    }

    #[test]
    fn bridge_marginals_and_energy_constancy() {
        for &(s0, s1, t) in &[(0.5, 3.0, 2.0), (2.0, 0.3, 1.0), (0.25, 2.25, 1.0), (1.0, 1.0, 0.5)] {
            let br = gaussian_bridge(s0, s1, t).unwrap();
            assert!((br.variance(0.0) - s0).abs() <= 1e-12);
            assert!((br.variance(t) - s1).abs() <= 1e-12);
            let e0 = 0.5 * (br.kinetic(0.1 * t) - br.fisher(0.1 * t));
            let e1 = 0.5 * (br.kinetic(0.8 * t) - br.fisher(0.8 * t));
            assert!((e0 - e1).abs() < 1e-12);
        }
        assert!((gaussian_bridge(0.5, 3.0, 2.0).unwrap().energy() + 0.148_801_97).abs() < 1e-8);
        assert!((gaussian_bridge(2.0, 0.3, 1.0).unwrap().energy() + 0.114_911_06).abs() < 1e-8);
    }

    #[test]
    fn bridge_derivatives_match_differences() {
        let br = gaussian_bridge(0.5, 3.0, 2.0).unwrap();
        let t = 0.7;
        let d = 1e-4;
        let fd1 = (br.entropy(t + d) - br.entropy(t - d)) / (2.0 * d);
        let fd2 = (br.entropy(t + d) - 2.0 * br.entropy(t) + br.entropy(t - d)) / (d * d);
        let (d1, d2) = br.entropy_derivatives(t);
        assert!((fd1 - d1).abs() < 1e-7);
        assert!((fd2 - d2).abs() < 1e-5);
    }

    #[test]
    fn bridge_rejects_bad_input() {
        assert!(gaussian_bridge(0.0, 1.0, 1.0).is_err());
        assert!(gaussian_bridge(1.0, 1.0, -1.0).is_err());
    }
}

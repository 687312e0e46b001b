//! Entropy-power curves along an interpolation and the concavity checks.

use rayon::prelude::*;

use crate::bridge::{interpolate, Decomposition};
use crate::calculus::gradient_values;
use crate::error::{Error, Result};
use crate::functionals::{analyze_sample, DeficitReport, FunctionalReport};
use crate::grid::Topology;

/// Absolute tolerance on `|E|` and on the bound column for the heat-flow reduction.
pub const REDUCTION_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct CurveReport {
    pub n: usize,
    /// Curvature bound of the geometry.
    pub k: f64,
    pub euclidean: bool,
    pub periodic: bool,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub functionals: Vec<FunctionalReport>,
    pub deficits: Vec<DeficitReport>,
    /// Five-point centred differences of `N`; NaN where the stencil does not fit.
    pub d2n_fd: Vec<f64>,
    pub d2n_analytic: Vec<f64>,
    pub bound: Vec<f64>,
    pub margin: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `t_k = T·k/(M+1)` for `k = 1..=M`.
pub fn sample_times(horizon: f64, samples: usize) -> Vec<f64> {
    (1..=samples).map(|k| horizon * k as f64 / (samples + 1) as f64).collect()
}

fn bound_value(fr: &FunctionalReport, n: f64, k: f64) -> f64 {
    let nn = fr.entropy_power;
    (4.0 / (n * n)) * nn * fr.fisher * fr.energy - (2.0 * k / n) * nn * (fr.kinetic + fr.fisher)
}

fn d2n_value(fr: &FunctionalReport, n: f64) -> f64 {
    fr.entropy_power * ((4.0 / (n * n)) * fr.d_entropy.powi(2) + (2.0 / n) * fr.d2_entropy)
}

/// Five-point second difference on a uniform grid.
pub fn second_difference(values: &[f64], step: f64) -> Vec<f64> {
    let m = values.len();
    (0..m)
        .map(|i| {
            if i < 2 || i + 2 >= m {
                return f64::NAN;
            }
            (-values[i - 2] + 16.0 * values[i - 1] - 30.0 * values[i] + 16.0 * values[i + 1]
                - values[i + 2])
                / (12.0 * step * step)
        })
        .collect()
}

pub fn build_curve(dec: &Decomposition, samples: usize) -> Result<CurveReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample required".into()));
    }
    let geo = dec.geometry();
    let times = sample_times(dec.horizon, samples);
    let reports: Vec<(FunctionalReport, DeficitReport)> = times
        .par_iter()
        .map(|&t| {
            interpolate(dec, t)
                .and_then(|s| analyze_sample(&s, geo))
                .map_err(|e| Error::Sample { t, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let (functionals, deficits): (Vec<_>, Vec<_>) = reports.into_iter().unzip();
    let n = geo.n() as f64;
    let k = geo.curvature();
    let d2n_analytic: Vec<f64> = functionals.iter().map(|f| d2n_value(f, n)).collect();
    let bound: Vec<f64> = functionals.iter().map(|f| bound_value(f, n, k)).collect();
    let margin = bound.iter().zip(&d2n_analytic).map(|(b, d)| b - d).collect();
    let ns: Vec<f64> = functionals.iter().map(|f| f.entropy_power).collect();
    let step = dec.horizon / (samples + 1) as f64;
    Ok(CurveReport {
        n: geo.n(),
        k,
        euclidean: geo.is_euclidean(),
        periodic: geo.grid().topology == Topology::PeriodicCircle,
        horizon: dec.horizon,
        times,
        functionals,
        deficits,
        d2n_fd: second_difference(&ns, step),
        d2n_analytic,
        bound,
        margin,
        iterations: dec.iterations,
        residual: dec.residual,
    })
}

impl CurveReport {
    /// `max E - min E` over the samples.
    pub fn energy_drift(&self) -> f64 {
        let (lo, hi) = self
            .functionals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.energy), hi.max(f.energy)));
        hi - lo
    }

    /// `1e-3 · max(1, max |N''|)`.
    pub fn default_tol_margin(&self) -> f64 {
        let m = self.d2n_analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-3 * m.max(1.0)
    }

    /// Worst relative residual of `lhs = A1 + A2 + cs_gap` over the samples.
    pub fn max_identity_residual(&self) -> f64 {
        self.deficits.iter().map(|d| d.identity_residual()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    Euclidean,
    Weighted,
    CostaReduction,
}

impl Theorem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Theorem::Euclidean => "euclidean",
            Theorem::Weighted => "weighted",
            Theorem::CostaReduction => "costa_reduction",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremCheck {
    pub theorem: Theorem,
    pub verdict: Verdict,
    pub min_margin: f64,
    pub tol_margin: f64,
    pub max_energy_drift: f64,
    /// Smallest `(n/(2N))·margin` over the samples.
    pub min_lhs_alternative: f64,
    pub k: f64,
    /// Largest `|E|` and distance of the bound column from its heat-flow
    /// form (reduction checks only).
    pub max_abs_energy: Option<f64>,
    pub reduction_gap: Option<f64>,
}

fn classify(margins: &[f64], tol: f64) -> (Verdict, f64) {
    let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let v = if !min.is_finite() || min < -tol {
        Verdict::Fail
    } else if min <= tol {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    (v, min)
}

fn evaluate(
    curve: &CurveReport,
    theorem: Theorem,
    k: f64,
    margins: Vec<f64>,
    tol: Option<f64>,
) -> TheoremCheck {
    let tol = tol.unwrap_or_else(|| curve.default_tol_margin());
    let n = curve.n as f64;
    let (mut verdict, min_margin) = classify(&margins, tol);
    let mut min_alt = f64::INFINITY;
    for (m, f) in margins.iter().zip(&curve.functionals) {
        let scale = n / (2.0 * f.entropy_power);
        let alt = scale * m;
        min_alt = min_alt.min(alt);
        if alt < -scale * tol {
            verdict = Verdict::Fail;
        }
    }
    TheoremCheck {
        theorem,
        verdict,
        min_margin,
        tol_margin: tol,
        max_energy_drift: curve.energy_drift(),
        min_lhs_alternative: min_alt,
        k,
        max_abs_energy: None,
        reduction_gap: None,
    }
}

/// `N'' ≤ (4/n²) N I E` on flat space with `n = m`.
pub fn check_euclidean(curve: &CurveReport, tol: Option<f64>) -> Result<TheoremCheck> {
    if !curve.euclidean {
        return Err(Error::WrongGeometry(
            "the Euclidean check needs a constant potential and n = m".into(),
        ));
    }
    Ok(evaluate(curve, Theorem::Euclidean, 0.0, curve.margin.clone(), tol))
}

fn weighted_margins(curve: &CurveReport, k: f64) -> Vec<f64> {
    let n = curve.n as f64;
    curve
        .functionals
        .iter()
        .zip(&curve.d2n_analytic)
        .map(|(f, d)| bound_value(f, n, k) - d)
        .collect()
}

/// `N'' ≤ (4/n²) N I E - (2K/n) N (kinetic + I)` on periodic grids.
pub fn check_weighted(curve: &CurveReport, k: f64, tol: Option<f64>) -> Result<TheoremCheck> {
    if !curve.periodic {
        return Err(Error::WrongGeometry("the weighted check needs a periodic grid".into()));
    }
    Ok(evaluate(curve, Theorem::Weighted, k, weighted_margins(curve, k), tol))
}

/// For `ν = P_T μ`: the energy vanishes, the bound column collapses to
/// `-(4K/n) N I`, and `N''` stays below it.
pub fn check_costa_reduction(curve: &CurveReport, k: f64, tol: Option<f64>) -> Result<TheoremCheck> {
    if !curve.periodic && k != 0.0 {
        return Err(Error::WrongGeometry("nonzero curvature needs a periodic grid".into()));
    }
    let n = curve.n as f64;
    let costa: Vec<f64> =
        curve.functionals.iter().map(|f| -(4.0 * k / n) * f.entropy_power * f.fisher).collect();
    let margins = costa.iter().zip(&curve.d2n_analytic).map(|(c, d)| c - d).collect();
    let mut check = evaluate(curve, Theorem::CostaReduction, k, margins, tol);
    let max_e = curve.functionals.iter().map(|f| f.energy.abs()).fold(0.0, f64::max);
    let gap = curve
        .functionals
        .iter()
        .zip(&costa)
        .map(|(f, c)| (bound_value(f, n, k) - c).abs())
        .fold(0.0, f64::max);
    if !(max_e <= REDUCTION_TOL && gap <= REDUCTION_TOL) {
        check.verdict = Verdict::Fail;
    }
    check.max_abs_energy = Some(max_e);
    check.reduction_gap = Some(gap);
    Ok(check)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqualityDiagnostic {
    pub t: f64,
    /// `‖∇ log P_t f‖_{L²(ρ)}`
    pub r_f: f64,
    /// `‖∇ log P_{T-t} g‖_{L²(ρ)}`
    pub r_g: f64,
    /// `1 - |⟨∇log ρ, ∇θ⟩| / (‖∇log ρ‖ ‖∇θ‖)` in `L²(ρ)`.
    pub cs_defect: f64,
    pub near_equality: bool,
}

pub fn equality_diagnostic(dec: &Decomposition, t: f64) -> Result<EqualityDiagnostic> {
    if !(t > 0.0 && t < dec.horizon) {
        return Err(Error::InvalidArgument(format!("t = {t} must lie in (0, {})", dec.horizon)));
    }
    let s = interpolate(dec, t)?;
    let grid = dec.grid();
    let rho = s.rho.values();
    let norm = |phi: &[f64]| -> f64 {
        let lp: Vec<f64> = phi.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).collect();
        let g = gradient_values(grid, &lp);
        let mut acc = 0.0;
        for i in 0..grid.node_count() {
            if s.support[i] {
                let sq: f64 = g.iter().map(|c| c[i] * c[i]).sum();
                acc += grid.weights[i] * rho[i] * sq;
            }
        }
        acc.sqrt()
    };
    let r_f = norm(s.pt_f.values());
    let r_g = norm(s.ptt_g.values());
    let gl = gradient_values(grid, &s.log_rho);
    let (mut dot, mut nl, mut nt) = (0.0, 0.0, 0.0);
    for i in 0..grid.node_count() {
        if s.support[i] {
            let w = grid.weights[i] * rho[i];
            for (a, c) in gl.iter().enumerate() {
                let v = s.velocity.component(a)[i];
                dot += w * c[i] * v;
                nl += w * c[i] * c[i];
                nt += w * v * v;
            }
        }
    }
    let denom = (nl * nt).sqrt();
    let cs_defect = if denom > 0.0 { 1.0 - dot.abs() / denom } else { 0.0 };
    Ok(EqualityDiagnostic {
        t,
        r_f,
        r_g,
        cs_defect,
        near_equality: r_f.min(r_g) < 1e-3 || cs_defect < 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_difference_exact_on_cubics() {
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.1).powi(3)).collect();
        let d = second_difference(&v, 0.1);
        assert!(d[0].is_nan() && d[1].is_nan() && d[7].is_nan() && d[8].is_nan());
        for i in 2..7 {
            assert!((d[i] - 6.0 * i as f64 * 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn classify_three_way() {
        assert_eq!(classify(&[0.5, 0.2], 1e-3).0, Verdict::Pass);
        assert_eq!(classify(&[0.5, 0.0005], 1e-3).0, Verdict::Inconclusive);
        assert_eq!(classify(&[0.5, -0.0005], 1e-3).0, Verdict::Inconclusive);
        assert_eq!(classify(&[0.5, -0.01], 1e-3).0, Verdict::Fail);
        assert_eq!(classify(&[f64::NAN], 1e-3).0, Verdict::Fail);
    }

    #[test]
    fn sample_times_exclude_endpoints() {
        let t = sample_times(1.0, 3);
        assert_eq!(t, vec![0.25, 0.5, 0.75]);
    }
}

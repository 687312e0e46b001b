//! Turns a parsed config into grids, marginals and verdicts.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::{CheckSelection, ConfigError, MarginalSpec, ScenarioConfig, Side};
use super::output::VerdictRecord;
use crate::bridge::{interpolate, solve_schrodinger, Decomposition};
use crate::calculus::GeometryConfig;
use crate::error::{Error, Result};
use crate::functionals::analyze_sample;
use crate::grid::{build_grid, normalize, uniform_indicator, DensityField, Grid, ScalarField};
use crate::semigroup::{build_semigroup, SemigroupOperator};
use crate::verdict::{
    build_curve, check_costa_reduction, check_euclidean, check_weighted, equality_diagnostic,
    CurveReport, Verdict,
};

type CResult<T> = std::result::Result<T, ConfigError>;

pub fn build_operator(cfg: &ScenarioConfig) -> CResult<Arc<SemigroupOperator>> {
    let grid = build_grid(&cfg.grid).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let geo = GeometryConfig::new(grid, cfg.n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let op = build_semigroup(&geo).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(Arc::new(op))
}

fn sample_shape(spec: &MarginalSpec, grid: &Arc<Grid>) -> CResult<Vec<f64>> {
    let axes = &grid.axes;
    let disp2 = |x: &[f64], c: &[f64]| -> f64 {
        x.iter().zip(c).zip(axes).map(|((&xi, &ci), a)| a.displacement(xi, ci).powi(2)).sum()
    };
    Ok(match spec {
        MarginalSpec::Gaussian { mean, var } => grid.sample(|x| (-disp2(x, mean) / (2.0 * var)).exp()),
        MarginalSpec::Bump { center, width } => grid.sample(|x| {
            let r2 = disp2(x, center) / (width * width);
            if r2 < 1.0 {
                (-1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        }),
        MarginalSpec::Uniform { a, b } => grid.sample(|x| {
            (0..x.len()).map(|k| uniform_indicator(x[k], a[k], b[k])).product()
        }),
        MarginalSpec::Mixture(parts) => {
            let mut acc = vec![0.0; grid.node_count()];
            for (w, p) in parts {
                let shape = sample_shape(p, grid)?;
                let mass = grid.integrate_values(&shape);
                if !(mass > 0.0) {
                    return Err(ConfigError::Invalid("mixture component has no mass on the grid".into()));
                }
                for (a, s) in acc.iter_mut().zip(&shape) {
                    *a += w * s / mass;
                }
            }
            acc
        }
        MarginalSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| ConfigError::Invalid(format!("`{s}` in {} is not a number", path.display()))))
                .collect::<CResult<_>>()?;
            if vals.len() != grid.node_count() {
                return Err(ConfigError::Invalid(format!(
                    "{} holds {} values for {} nodes",
                    path.display(),
                    vals.len(),
                    grid.node_count()
                )));
            }
            vals
        }
        MarginalSpec::HeatOf { .. } => unreachable!("resolved by the caller"),
    })
}

fn to_density(values: Vec<f64>, grid: &Arc<Grid>, side: &str) -> CResult<DensityField> {
    let field = ScalarField::new(grid.clone(), values)
        .map_err(|e| ConfigError::Invalid(format!("marginal {side}: {e}")))?;
    normalize(&field).map_err(|e| ConfigError::Invalid(format!("marginal {side}: {e}")))
}

/// Marginals for horizon `horizon`; the flag says whether one of them is
/// the heat flow of the other over the full horizon.
pub fn build_marginals(
    cfg: &ScenarioConfig,
    op: &SemigroupOperator,
    horizon: f64,
) -> CResult<(DensityField, DensityField, bool)> {
    let grid = op.grid();
    let heat = |source: &DensityField, time: Option<f64>, side: &str| -> CResult<(DensityField, bool)> {
        let t = time.unwrap_or(horizon);
        let moved = op
            .propagator(t)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?
            .apply_values(source.values());
        let clipped = moved.into_iter().map(|v| v.max(0.0)).collect();
        Ok((to_density(clipped, grid, side)?, t == horizon))
    };
    match (&cfg.mu, &cfg.nu) {
        (mu, MarginalSpec::HeatOf { source: Side::Mu, time }) => {
            let u = to_density(sample_shape(mu, grid)?, grid, "mu")?;
            let (v, full) = heat(&u, *time, "nu")?;
            Ok((u, v, full))
        }
        (MarginalSpec::HeatOf { source: Side::Nu, time }, nu) => {
            let v = to_density(sample_shape(nu, grid)?, grid, "nu")?;
            let (u, full) = heat(&v, *time, "mu")?;
            Ok((u, v, full))
        }
        (mu, nu) => Ok((
            to_density(sample_shape(mu, grid)?, grid, "mu")?,
            to_density(sample_shape(nu, grid)?, grid, "nu")?,
            false,
        )),
    }
}

pub struct Outcome {
    pub decomposition: Decomposition,
    pub curve: CurveReport,
    pub records: Vec<VerdictRecord>,
}

impl Outcome {
    pub fn any_fail(&self) -> bool {
        self.records.iter().any(|r| r.check.verdict == Verdict::Fail)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn execute(
    cfg: &ScenarioConfig,
    op: &Arc<SemigroupOperator>,
    u: &DensityField,
    v: &DensityField,
    heat_reduction: bool,
    horizon: f64,
    samples: usize,
    tol: Option<f64>,
) -> Result<Outcome> {
    let dec = solve_schrodinger(op, u, v, horizon, &cfg.solver)?;
    let curve = build_curve(&dec, samples)?;
    let geo = dec.geometry();
    let k = geo.curvature();
    let mut checks = Vec::new();
    match cfg.check {
        CheckSelection::Auto => {
            if geo.is_euclidean() {
                checks.push(check_euclidean(&curve, tol)?);
            } else {
                checks.push(check_weighted(&curve, k, tol)?);
            }
            if heat_reduction {
                checks.push(check_costa_reduction(&curve, k, tol)?);
            }
        }
        CheckSelection::Euclidean => checks.push(check_euclidean(&curve, tol)?),
        CheckSelection::Weighted => checks.push(check_weighted(&curve, k, tol)?),
        CheckSelection::CostaReduction => checks.push(check_costa_reduction(&curve, k, tol)?),
    }
    let equality = equality_diagnostic(&dec, 0.5 * horizon).ok();
    let records = checks
        .into_iter()
        .map(|check| VerdictRecord {
            scenario: cfg.id.clone(),
            check,
            iterations: dec.iterations,
            residual: dec.residual,
            equality,
        })
        .collect();
    Ok(Outcome { decomposition: dec, curve, records })
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub horizon: f64,
    pub energy: f64,
    /// `‖ρ^T_{t*} - P_{t*} u‖_{L¹(m)}`
    pub heat_distance: f64,
    /// `‖g^T - v‖_{L¹(m)}`
    pub g_defect: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub const SWEEP_HEADER: &str = "T,energy,rho_heat_l1,g_v_l1,iterations,residual";

/// Checks the hypotheses of the long-time limit: `K ≥ 0` and `m(M) = 1`.
pub fn check_sweep_preconditions(cfg: &ScenarioConfig, op: &SemigroupOperator, horizons: &[f64]) -> CResult<()> {
    if horizons.is_empty() || horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(ConfigError::Invalid("sweep horizons must be positive".into()));
    }
    let geo = op.geometry();
    if geo.curvature() < 0.0 {
        return Err(ConfigError::Invalid(format!(
            "long-time sweep needs K >= 0, found {}",
            geo.curvature()
        )));
    }
    if (op.grid().reference_mass() - 1.0).abs() > 1e-12 {
        return Err(ConfigError::Invalid(
            "long-time sweep needs a probability reference measure (geometry.normalize_measure = true)".into(),
        ));
    }
    let tmin = horizons.iter().cloned().fold(f64::INFINITY, f64::min);
    if cfg.t_star >= tmin {
        return Err(ConfigError::Invalid(format!("sweep.t_star = {} must be below every T", cfg.t_star)));
    }
    Ok(())
}

fn l1(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(&grid.weights).map(|((x, y), w)| (x - y).abs() * w).sum()
}

pub fn sweep_row(cfg: &ScenarioConfig, op: &Arc<SemigroupOperator>, horizon: f64) -> std::result::Result<SweepRow, SweepError> {
    let (u, v, _) = build_marginals(cfg, op, horizon).map_err(SweepError::Config)?;
    let run = || -> Result<SweepRow> {
        let dec = solve_schrodinger(op, &u, &v, horizon, &cfg.solver)?;
        let mid = interpolate(&dec, 0.5 * horizon)?;
        let energy = analyze_sample(&mid, dec.geometry())?.0.energy;
        let at = interpolate(&dec, cfg.t_star)?;
        let heat = op.propagator(cfg.t_star)?.apply_values(u.values());
        let grid = op.grid();
        Ok(SweepRow {
            horizon,
            energy,
            heat_distance: l1(grid, at.rho.values(), &heat),
            g_defect: l1(grid, dec.g.values(), v.values()),
            iterations: dec.iterations,
            residual: dec.residual,
        })
    };
    run().map_err(SweepError::Run)
}

#[derive(Debug)]
pub enum SweepError {
    Config(ConfigError),
    Run(Error),
}

pub fn sweep(cfg: &ScenarioConfig, op: &Arc<SemigroupOperator>, horizons: &[f64]) -> std::result::Result<Vec<SweepRow>, SweepError> {
    horizons.par_iter().map(|&t| sweep_row(cfg, op, t)).collect()
}

//! The heat / Witten semigroup `P_t = e^{tL}`.
//!
//! Boxes use a Gaussian kernel of variance `2t` per axis, reflected at the
//! faces by the method of images and normalized on the lattice, so rows sum
//! to one and the operator is symmetric in `L²(m)`. Periodic grids use a
//! dense eigendecomposition of `e^{-V/2} L e^{V/2}` built from Fourier
//! differentiation matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::calculus::GeometryConfig;
use crate::error::{Error, Result};
use crate::grid::{Axis, DensityField, Grid, ScalarField, Topology};

/// Largest node count accepted by the dense eigensolver.
pub const SPECTRAL_NODE_BUDGET: usize = 4096;

/// `exp(-z²/4t)` is below `e^{-745}` past `|z| = sqrt(4t·745)`.
const TAIL_EXPONENT: f64 = 745.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    GaussianKernel,
    Spectral,
}

#[derive(Debug)]
struct SpectralFactors {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    /// `e^{V/2}` and `e^{-V/2}` at the nodes.
    half_up: Vec<f64>,
    half_down: Vec<f64>,
}

#[derive(Debug)]
pub struct SemigroupOperator {
    geometry: GeometryConfig,
    spectral: Option<SpectralFactors>,
}

pub fn build_semigroup(geo: &GeometryConfig) -> Result<SemigroupOperator> {
    let grid = geo.grid();
    match grid.topology {
        Topology::TruncatedBox => {
            if !grid.is_flat() {
                return Err(Error::Unsupported(
                    "box grids support only a constant potential".into(),
                ));
            }
            Ok(SemigroupOperator { geometry: geo.clone(), spectral: None })
        }
        Topology::PeriodicCircle => {
            let count = grid.node_count();
            if count > SPECTRAL_NODE_BUDGET {
                return Err(Error::Unsupported(format!(
                    "{count} nodes exceed the dense eigensolve budget of {SPECTRAL_NODE_BUDGET}"
                )));
            }
            let spectral = spectral_factors(grid);
            Ok(SemigroupOperator { geometry: geo.clone(), spectral: Some(spectral) })
        }
    }
}

/// Fourier differentiation matrices `(D, D²)` for one periodic axis.
fn fourier_matrices(axis: &Axis) -> (Vec<f64>, Vec<f64>) {
    let n = axis.points;
    let h = 2.0 * PI / n as f64;
    let scale = 2.0 * PI / axis.extent;
    let even = n % 2 == 0;
    let mut d1 = vec![0.0; n * n];
    let mut d2 = vec![0.0; n * n];
    let diag2 = if even {
        -PI * PI / (3.0 * h * h) - 1.0 / 6.0
    } else {
        -PI * PI / (3.0 * h * h) + 1.0 / 12.0
    };
    for j in 0..n {
        for k in 0..n {
            let idx = j * n + k;
            if j == k {
                d2[idx] = diag2 * scale * scale;
                continue;
            }
            let diff = j as isize - k as isize;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let x = diff as f64 * h / 2.0;
            let (a, b) = if even {
                (0.5 * sign / x.tan(), -0.5 * sign / (x.sin() * x.sin()))
            } else {
                (0.5 * sign / x.sin(), -0.5 * sign / (x.sin() * x.tan()))
            };
            d1[idx] = a * scale;
            d2[idx] = b * scale * scale;
        }
    }
    (d1, d2)
}

/// Applies a dense `n×n` row-major matrix along one axis.
fn apply_axis(grid: &Grid, mat: &[f64], values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.axes[axis].points;
    let stride = grid.stride(axis);
    let outer = grid.node_count() / (stride * n);
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; n];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * stride * n + i;
            for (k, l) in line.iter_mut().enumerate() {
                *l = values[base + k * stride];
            }
            for r in 0..n {
                let row = &mat[r * n..(r + 1) * n];
                out[base + r * stride] = row.iter().zip(&line).map(|(a, b)| a * b).sum();
            }
        }
    }
    out
}

fn spectral_factors(grid: &Grid) -> SpectralFactors {
    let count = grid.node_count();
    let mats: Vec<(Vec<f64>, Vec<f64>)> = grid.axes.iter().map(fourier_matrices).collect();
    let v = &grid.potential;
    let mut u = vec![0.0; count];
    if !grid.is_flat() {
        for (a, (d1, d2)) in mats.iter().enumerate() {
            let dv = apply_axis(grid, d1, v, a);
            let ddv = apply_axis(grid, d2, v, a);
            for i in 0..count {
                u[i] += 0.25 * dv[i] * dv[i] - 0.5 * ddv[i];
            }
        }
    }
    let mut s = DMatrix::<f64>::zeros(count, count);
    for (a, (_, d2)) in mats.iter().enumerate() {
        let n = grid.axes[a].points;
        let stride = grid.stride(a);
        for row in 0..count {
            let i = (row / stride) % n;
            let base = row - i * stride;
            for j in 0..n {
                s[(row, base + j * stride)] += d2[i * n + j];
            }
        }
    }
    for i in 0..count {
        s[(i, i)] -= u[i];
    }
    // exact symmetry before the solver sees it
    let st = s.transpose();
    let s = (s + st) * 0.5;
    let eig = SymmetricEigen::new(s);
    let eigenvalues = eig.eigenvalues.iter().map(|&l| l.min(0.0)).collect();
    SpectralFactors {
        eigenvalues,
        eigenvectors: eig.eigenvectors,
        half_up: v.iter().map(|x| (0.5 * x).exp()).collect(),
        half_down: v.iter().map(|x| (-0.5 * x).exp()).collect(),
    }
}

/// Image sums `s_m = Σ_k exp(-((m + kP)h)²/4t)` for `m` in `0..P`.
fn image_sums(period: usize, h: f64, t: f64) -> Vec<f64> {
    let zmax = (4.0 * t * TAIL_EXPONENT).sqrt() / h;
    let p = period as f64;
    (0..period)
        .map(|m| {
            let m = m as f64;
            let kmin = ((-zmax - m) / p).floor() as i64;
            let kmax = ((zmax - m) / p).ceil() as i64;
            (kmin..=kmax)
                .map(|k| {
                    let z = (m + k as f64 * p) * h;
                    (-z * z / (4.0 * t)).exp()
                })
                .sum()
        })
        .collect()
}

/// Reflected lattice heat kernel for one box axis, row-major.
fn reflecting_kernel(axis: &Axis, t: f64) -> Vec<f64> {
    let n = axis.points;
    let h = axis.spacing;
    let period = 2 * (n - 1);
    let s = image_sums(period, h, t);
    let c = 1.0 / (h * s.iter().sum::<f64>());
    let q = axis.quadrature();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let a = (i + period - j) % period;
            let b = (i + j) % period;
            k[i * n + j] = c * (s[a] + s[b]) * q[j];
        }
    }
    k
}

/// Unreflected lattice heat kernel for one box axis; mass leaving the box is lost.
fn free_kernel(axis: &Axis, t: f64) -> Vec<f64> {
    let n = axis.points;
    let h = axis.spacing;
    let reach = ((4.0 * t * TAIL_EXPONENT).sqrt() / h).ceil() as i64;
    let total: f64 = (-reach..=reach)
        .map(|m| {
            let z = m as f64 * h;
            (-z * z / (4.0 * t)).exp()
        })
        .sum();
    let c = 1.0 / (h * total);
    let q = axis.quadrature();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let z = (i as f64 - j as f64) * h;
            k[i * n + j] = c * (-z * z / (4.0 * t)).exp() * q[j];
        }
    }
    k
}

enum Inner {
    Identity,
    Kernel(Vec<Vec<f64>>),
    Spectral(Vec<f64>),
}

/// `P_t` for one fixed `t`, with its kernel or decay factors precomputed.
pub struct Propagator<'a> {
    op: &'a SemigroupOperator,
    t: f64,
    inner: Inner,
}

impl SemigroupOperator {
    pub fn geometry(&self) -> &GeometryConfig {
        &self.geometry
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.geometry.grid()
    }

    pub fn representation(&self) -> Representation {
        if self.spectral.is_some() {
            Representation::Spectral
        } else {
            Representation::GaussianKernel
        }
    }

    /// Eigenvalues of the symmetrized generator, unsorted (spectral mode).
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.spectral.as_ref().map(|s| s.eigenvalues.as_slice())
    }

    /// Eigenvector `k` in the symmetrized gauge (spectral mode).
    pub fn eigenvector(&self, k: usize) -> Option<Vec<f64>> {
        self.spectral.as_ref().map(|s| s.eigenvectors.column(k).iter().copied().collect())
    }

    pub fn propagator(&self, t: f64) -> Result<Propagator<'_>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("semigroup time {t} must be >= 0")));
        }
        let inner = if t == 0.0 {
            Inner::Identity
        } else {
            match &self.spectral {
                None => Inner::Kernel(
                    self.grid().axes.iter().map(|a| reflecting_kernel(a, t)).collect(),
                ),
                Some(s) => Inner::Spectral(s.eigenvalues.iter().map(|l| (t * l).exp()).collect()),
            }
        };
        Ok(Propagator { op: self, t, inner })
    }
}

impl Propagator<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        let grid = self.op.grid();
        match &self.inner {
            Inner::Identity => values.to_vec(),
            Inner::Kernel(mats) => {
                let mut cur = values.to_vec();
                for (a, m) in mats.iter().enumerate() {
                    cur = apply_axis(grid, m, &cur, a);
                }
                cur
            }
            Inner::Spectral(decay) => {
                let s = self.op.spectral.as_ref().expect("spectral factors");
                // the m-mean is invariant; only the fluctuation goes through
                // the eigenbasis, so constants are reproduced exactly
                let mean = grid.integrate_values(values) / grid.reference_mass();
                let x = DVector::from_iterator(
                    values.len(),
                    values.iter().zip(&s.half_down).map(|(v, e)| (v - mean) * e),
                );
                let mut y = s.eigenvectors.tr_mul(&x);
                for (yi, d) in y.iter_mut().zip(decay) {
                    *yi *= d;
                }
                let z = &s.eigenvectors * y;
                let mut out: Vec<f64> = z.iter().zip(&s.half_up).map(|(v, e)| v * e).collect();
                // the computed ground mode is orthogonal to the rest only up to
                // round-off; re-centre so the mass does not drift with t
                let drift = grid.integrate_values(&out) / grid.reference_mass();
                for o in out.iter_mut() {
                    *o += mean - drift;
                }
                out
            }
        }
    }

    pub fn apply(&self, phi: &ScalarField) -> Result<ScalarField> {
        if phi.values().len() != self.op.grid().node_count() {
            return Err(Error::InvalidArgument("field does not match the semigroup grid".into()));
        }
        ScalarField::new(self.op.grid().clone(), self.apply_values(phi.values()))
    }
}

/// `P_t φ`.
pub fn apply(op: &SemigroupOperator, phi: &ScalarField, t: f64) -> Result<ScalarField> {
    op.propagator(t)?.apply(phi)
}

/// Mass lost by `u` after time `t`.
///
/// In kernel mode the operator itself conserves mass, so this reports what
/// the unreflected heat flow carries past the box faces: the truncation
/// error of the domain. In spectral mode it is `|∫ P_t u dm - 1|`.
pub fn mass_defect(op: &SemigroupOperator, u: &DensityField, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("semigroup time {t} must be >= 0")));
    }
    let grid = op.grid();
    let moved = match op.representation() {
        Representation::Spectral => op.propagator(t)?.apply_values(u.values()),
        Representation::GaussianKernel if t == 0.0 => u.values().to_vec(),
        Representation::GaussianKernel => {
            let mut cur = u.values().to_vec();
            for (a, axis) in grid.axes.iter().enumerate() {
                cur = apply_axis(grid, &free_kernel(axis, t), &cur, a);
            }
            cur
        }
    };
    Ok((grid.integrate_values(&moved) - 1.0).abs())
}

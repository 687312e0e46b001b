//! Finite-difference operators: gradient, Hessian, the weighted generator
//! `L = Δ - ∇V·∇`, the iterated carré du champ and the curvature bound.
//!
//! Every axis uses the same five-point first-derivative stencil (circular on
//! periodic axes, one-sided closure on box faces). Second derivatives are
//! compositions of it, so `trace(hessian) == laplacian` holds exactly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, Topology};

#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// `|X|²` at each node.
    pub fn norm_sq(&self) -> Vec<f64> {
        pointwise_dot(&self.components, &self.components)
    }
}

/// Symmetric matrix per node; only the upper triangle is stored.
#[derive(Clone, Debug)]
pub struct MatrixField {
    grid: Arc<Grid>,
    dim: usize,
    upper: Vec<Vec<f64>>,
}

impl MatrixField {
    fn slot(dim: usize, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * dim - a * (a.saturating_sub(1)) / 2 + (b - a)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn get(&self, node: usize, a: usize, b: usize) -> f64 {
        self.upper[Self::slot(self.dim, a, b)][node]
    }

    pub fn entry(&self, a: usize, b: usize) -> &[f64] {
        &self.upper[Self::slot(self.dim, a, b)]
    }

    /// `Σ_ab (H_ab + λ δ_ab)²` at each node.
    pub fn shifted_hs_sq(&self, lambda: f64) -> Vec<f64> {
        let n = self.grid.node_count();
        let mut out = vec![0.0; n];
        for a in 0..self.dim {
            for b in 0..self.dim {
                let e = self.entry(a, b);
                let shift = if a == b { lambda } else { 0.0 };
                for (o, v) in out.iter_mut().zip(e) {
                    let x = v + shift;
                    *o += x * x;
                }
            }
        }
        out
    }

    /// Squared Hilbert–Schmidt norm at each node.
    pub fn hs_norm_sq(&self) -> Vec<f64> {
        self.shifted_hs_sq(0.0)
    }

    pub fn trace(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.node_count()];
        for a in 0..self.dim {
            for (o, v) in out.iter_mut().zip(self.entry(a, a)) {
                *o += v;
            }
        }
        out
    }
}

/// Effective dimension `n` and the curvature bound `K` attached to a grid.
#[derive(Clone, Debug)]
pub struct GeometryConfig {
    grid: Arc<Grid>,
    n: usize,
    k: f64,
    grad_v: Vec<Vec<f64>>,
    /// `e^{-(V - min V)}` and its reciprocal, for the divergence form of `L`.
    tilt: Option<(Vec<f64>, Vec<f64>)>,
}

impl GeometryConfig {
    pub fn new(grid: Arc<Grid>, n: usize) -> Result<Self> {
        let k = curvature_bound(&grid, n)?;
        let grad_v = if grid.is_flat() {
            vec![vec![0.0; grid.node_count()]; grid.dimension()]
        } else {
            gradient_values(&grid, &grid.potential)
        };
        let tilt = (!grid.is_flat()).then(|| {
            let vmin = grid.potential.iter().cloned().fold(f64::INFINITY, f64::min);
            let down = grid.potential.iter().map(|v| (vmin - v).exp()).collect();
            let up = grid.potential.iter().map(|v| (v - vmin).exp()).collect();
            (down, up)
        });
        Ok(GeometryConfig { grid, n, k, grad_v, tilt })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn curvature(&self) -> f64 {
        self.k
    }

    /// Flat potential and `n = m`.
    pub fn is_euclidean(&self) -> bool {
        self.grid.is_flat() && self.n == self.grid.dimension()
    }

    pub fn grad_potential(&self) -> &[Vec<f64>] {
        &self.grad_v
    }
}

// ---- raw kernels -------------------------------------------------------

const C0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const C1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

fn diff_line(src: &[f64], dst: &mut [f64], h: f64, periodic: bool) {
    let n = src.len();
    let s = 1.0 / (12.0 * h);
    if periodic {
        for i in 0..n {
            let m2 = src[(i + n - 2) % n];
            let m1 = src[(i + n - 1) % n];
            let p1 = src[(i + 1) % n];
            let p2 = src[(i + 2) % n];
            dst[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * s;
        }
        return;
    }
    for i in 2..n - 2 {
        dst[i] = (src[i - 2] - 8.0 * src[i - 1] + 8.0 * src[i + 1] - src[i + 2]) * s;
    }
    let dot = |c: &[f64; 5], f: &dyn Fn(usize) -> f64| (0..5).map(|k| c[k] * f(k)).sum::<f64>();
    dst[0] = dot(&C0, &|k| src[k]) * s;
    dst[1] = dot(&C1, &|k| src[k]) * s;
    dst[n - 1] = -dot(&C0, &|k| src[n - 1 - k]) * s;
    dst[n - 2] = -dot(&C1, &|k| src[n - 1 - k]) * s;
}

/// First derivative of node values along one axis.
pub(crate) fn diff_axis(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let ax = &grid.axes[axis];
    let n = ax.points;
    let stride = grid.stride(axis);
    let outer = grid.node_count() / (stride * n);
    let periodic = ax.topology == Topology::PeriodicCircle;
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; n];
    let mut d = vec![0.0; n];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * stride * n + i;
            for (k, l) in line.iter_mut().enumerate() {
                *l = values[base + k * stride];
            }
            diff_line(&line, &mut d, ax.spacing, periodic);
            for (k, dk) in d.iter().enumerate() {
                out[base + k * stride] = *dk;
            }
        }
    }
    out
}

pub(crate) fn gradient_values(grid: &Grid, values: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dimension()).map(|a| diff_axis(grid, values, a)).collect()
}

pub(crate) fn pointwise_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; a[0].len()];
    for (ca, cb) in a.iter().zip(b) {
        for ((o, x), y) in out.iter_mut().zip(ca).zip(cb) {
            *o += x * y;
        }
    }
    out
}

fn hessian_upper(grid: &Grid, grad: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = grid.dimension();
    let mut upper = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            if a == b {
                upper.push(diff_axis(grid, &grad[a], a));
            } else {
                let ab = diff_axis(grid, &grad[b], a);
                let ba = diff_axis(grid, &grad[a], b);
                upper.push(ab.iter().zip(&ba).map(|(x, y)| 0.5 * (x + y)).collect());
            }
        }
    }
    upper
}

/// `Lφ` given the precomputed gradient of `φ`.
pub(crate) fn generator_from_grad(geo: &GeometryConfig, grad: &[Vec<f64>]) -> Vec<f64> {
    let grid = &geo.grid;
    let mut out = vec![0.0; grid.node_count()];
    match &geo.tilt {
        None => {
            for (a, g) in grad.iter().enumerate() {
                for (o, x) in out.iter_mut().zip(diff_axis(grid, g, a)) {
                    *o += x;
                }
            }
        }
        // e^V div(e^{-V} ∇φ): with an antisymmetric stencil the discrete L is
        // then exactly symmetric in L²(m)
        Some((down, up)) => {
            for (a, g) in grad.iter().enumerate() {
                let flux: Vec<f64> = g.iter().zip(down).map(|(x, d)| x * d).collect();
                for (o, x) in out.iter_mut().zip(diff_axis(grid, &flux, a)) {
                    *o += x;
                }
            }
            for (o, u) in out.iter_mut().zip(up) {
                *o *= u;
            }
        }
    }
    out
}

pub(crate) fn generator_values(geo: &GeometryConfig, values: &[f64]) -> Vec<f64> {
    let grad = gradient_values(&geo.grid, values);
    generator_from_grad(geo, &grad)
}

/// `Γ₂(φ)` given the gradient of `φ`; also returns `Lφ`.
pub(crate) fn gamma2_from_grad(geo: &GeometryConfig, grad: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let sq = pointwise_dot(grad, grad);
    let l_sq = generator_values(geo, &sq);
    let l_phi = generator_from_grad(geo, grad);
    let grad_l = gradient_values(&geo.grid, &l_phi);
    let cross = pointwise_dot(grad, &grad_l);
    let g2 = l_sq.iter().zip(&cross).map(|(a, c)| 0.5 * a - c).collect();
    (g2, l_phi)
}

// ---- public operations -------------------------------------------------

pub fn gradient(phi: &ScalarField) -> VectorField {
    let grid = phi.grid().clone();
    let components = gradient_values(&grid, phi.values());
    VectorField { grid, components }
}

pub fn hessian(phi: &ScalarField) -> MatrixField {
    let grid = phi.grid().clone();
    let grad = gradient_values(&grid, phi.values());
    let upper = hessian_upper(&grid, &grad);
    MatrixField { dim: grid.dimension(), grid, upper }
}

pub(crate) fn hessian_from_grad(grid: &Arc<Grid>, grad: &[Vec<f64>]) -> MatrixField {
    MatrixField { dim: grid.dimension(), grid: grid.clone(), upper: hessian_upper(grid, grad) }
}

fn check_grid(phi: &ScalarField, geo: &GeometryConfig) -> Result<()> {
    if !Arc::ptr_eq(phi.grid(), &geo.grid) && **phi.grid() != *geo.grid {
        return Err(Error::InvalidArgument("field and geometry live on different grids".into()));
    }
    Ok(())
}

/// `Δφ - ⟨∇V, ∇φ⟩`.
pub fn generator(phi: &ScalarField, geo: &GeometryConfig) -> Result<ScalarField> {
    check_grid(phi, geo)?;
    ScalarField::new(geo.grid.clone(), generator_values(geo, phi.values()))
}

/// `½ L|∇φ|² - ⟨∇φ, ∇Lφ⟩`.
pub fn gamma2(phi: &ScalarField, geo: &GeometryConfig) -> Result<ScalarField> {
    check_grid(phi, geo)?;
    let grad = gradient_values(&geo.grid, phi.values());
    ScalarField::new(geo.grid.clone(), gamma2_from_grad(geo, &grad).0)
}

fn smallest_eigenvalue(m: &[f64], dim: usize) -> f64 {
    match dim {
        1 => m[0],
        _ => {
            let (a, b, c) = (m[0], m[1], m[2]);
            let mean = 0.5 * (a + c);
            let half = 0.5 * (a - c);
            mean - (half * half + b * b).sqrt()
        }
    }
}

/// Minimum of the quartic through five equally spaced samples, searched on
/// the central two cells. Returns the decrease below the centre value.
fn quartic_decrement(y: [f64; 5]) -> f64 {
    let [ym2, ym1, y0, y1, y2] = y;
    let d1 = (ym2 - 8.0 * ym1 + 8.0 * y1 - y2) / 12.0;
    let d2 = (-ym2 + 16.0 * ym1 - 30.0 * y0 + 16.0 * y1 - y2) / 12.0;
    let d3 = (-ym2 + 2.0 * ym1 - 2.0 * y1 + y2) / 2.0;
    let d4 = ym2 - 4.0 * ym1 + 6.0 * y0 - 4.0 * y1 + y2;
    if d2 <= 0.0 {
        return 0.0;
    }
    let p = |s: f64| y0 + s * d1 + s * s / 2.0 * d2 + s.powi(3) / 6.0 * d3 + s.powi(4) / 24.0 * d4;
    let mut s = (-d1 / d2).clamp(-1.0, 1.0);
    for _ in 0..30 {
        let g = d1 + s * d2 + s * s / 2.0 * d3 + s.powi(3) / 6.0 * d4;
        let gg = d2 + s * d3 + s * s / 2.0 * d4;
        if gg <= 0.0 {
            break;
        }
        s = (s - g / gg).clamp(-1.0, 1.0);
    }
    (y0 - p(s)).max(0.0)
}

fn parabola_decrement(ym1: f64, y0: f64, y1: f64) -> f64 {
    let c = ym1 - 2.0 * y0 + y1;
    if c <= 0.0 {
        return 0.0;
    }
    ((y1 - ym1).powi(2) / (8.0 * c)).max(0.0)
}

/// `K = min_x λ_min(Hess V - ∇V⊗∇V/(n-m))`.
///
/// The node minimum is refined by a local polynomial fit along each axis so
/// that the result bounds the continuous minimum from below.
pub fn curvature_bound(grid: &Grid, n: usize) -> Result<f64> {
    let m = grid.dimension();
    if n < m {
        return Err(Error::InvalidGeometry(format!(
            "effective dimension {n} below manifold dimension {m}"
        )));
    }
    let flat = grid.is_flat();
    if n == m && !flat {
        return Err(Error::InvalidGeometry(
            "n = m requires a constant potential".into(),
        ));
    }
    if flat {
        return Ok(0.0);
    }
    let inv = 1.0 / (n - m) as f64;
    let grad = gradient_values(grid, &grid.potential);
    let hess = hessian_upper(grid, &grad);
    let count = grid.node_count();
    let lam: Vec<f64> = (0..count)
        .map(|i| {
            let mut mat = Vec::with_capacity(hess.len());
            for a in 0..m {
                for b in a..m {
                    let idx = MatrixField::slot(m, a, b);
                    mat.push(hess[idx][i] - grad[a][i] * grad[b][i] * inv);
                }
            }
            smallest_eigenvalue(&mat, m)
        })
        .collect();
    let (imin, &lmin) = lam
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid has nodes");

    let mi = grid.multi_index(imin);
    let mut decrement = 0.0;
    for (a, ax) in grid.axes.iter().enumerate() {
        let stride = grid.stride(a) as isize;
        let np = ax.points as isize;
        let i = mi[a] as isize;
        let at = |off: isize| -> Option<f64> {
            let j = i + off;
            let j = match ax.topology {
                Topology::PeriodicCircle => j.rem_euclid(np),
                Topology::TruncatedBox if (0..np).contains(&j) => j,
                Topology::TruncatedBox => return None,
            };
            Some(lam[(imin as isize + (j - i) * stride) as usize])
        };
        decrement += match (at(-2), at(-1), at(1), at(2)) {
            (Some(a2), Some(a1), Some(b1), Some(b2)) => quartic_decrement([a2, a1, lmin, b1, b2]),
            (_, Some(a1), Some(b1), _) => parabola_decrement(a1, lmin, b1),
            _ => 0.0,
        };
    }
    Ok(lmin - decrement)
}

//! Discretized domains, quadrature weights and the two field types.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Minimum points per axis.
pub const MIN_POINTS: usize = 16;

/// Default mass tolerance for [`DensityField`].
pub const MASS_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// `[-L, L]` per axis, nodes on both faces.
    TruncatedBox,
    /// `[0, C)` per axis, `C` the circumference.
    PeriodicCircle,
}

/// Potential `V` of the reference measure `m = e^{-V} vol`.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// `V = -Σ_a cos(φ_a)`
    NegCos,
    /// `V = Σ_a Σ_k c_k cos(k φ_a)`, `k` starting at 0.
    Cosine(Vec<f64>),
    /// Raw node values.
    Nodes(Vec<f64>),
}

/// Grid request handed to [`build_grid`].
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub topology: Topology,
    /// Per axis: box half-width `L` or circle circumference.
    pub extents: Vec<f64>,
    pub points: Vec<usize>,
    pub potential: Potential,
    /// Shift `V` by a constant so that `∫ 1 dm = 1`.
    pub normalize_measure: bool,
}

impl GridSpec {
    pub fn box_1d(half_width: f64, points: usize) -> Self {
        GridSpec {
            topology: Topology::TruncatedBox,
            extents: vec![half_width],
            points: vec![points],
            potential: Potential::Zero,
            normalize_measure: false,
        }
    }

    pub fn circle(circumference: f64, points: usize, potential: Potential) -> Self {
        GridSpec {
            topology: Topology::PeriodicCircle,
            extents: vec![circumference],
            points: vec![points],
            potential,
            normalize_measure: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub topology: Topology,
    pub extent: f64,
    pub points: usize,
    pub spacing: f64,
}

impl Axis {
    pub fn coord(&self, i: usize) -> f64 {
        match self.topology {
            Topology::TruncatedBox => -self.extent + i as f64 * self.spacing,
            Topology::PeriodicCircle => i as f64 * self.spacing,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// One-dimensional quadrature weights (no potential).
    pub fn quadrature(&self) -> Vec<f64> {
        let mut q = vec![self.spacing; self.points];
        if self.topology == Topology::TruncatedBox {
            q[0] *= 0.5;
            q[self.points - 1] *= 0.5;
        }
        q
    }

    /// Angle used by the cosine presets: `2πx/C` on circles, `x` on boxes.
    pub fn phase(&self, x: f64) -> f64 {
        match self.topology {
            Topology::TruncatedBox => x,
            Topology::PeriodicCircle => 2.0 * PI * x / self.extent,
        }
    }

    /// Signed displacement `x - c`, wrapped to the shortest arc on circles.
    pub fn displacement(&self, x: f64, c: f64) -> f64 {
        let d = x - c;
        match self.topology {
            Topology::TruncatedBox => d,
            Topology::PeriodicCircle => d - self.extent * (d / self.extent).round(),
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct Grid {
    pub topology: Topology,
    pub axes: Vec<Axis>,
    /// `V` at the nodes.
    pub potential: Vec<f64>,
    /// Quadrature weight times `e^{-V}` per node.
    pub weights: Vec<f64>,
}

pub fn build_grid(spec: &GridSpec) -> Result<Arc<Grid>> {
    let dim = spec.extents.len();
    if dim == 0 || dim > 2 {
        return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=2")));
    }
    if spec.points.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "{} extents but {} point counts",
            dim,
            spec.points.len()
        )));
    }
    let mut axes = Vec::with_capacity(dim);
    for (&extent, &points) in spec.extents.iter().zip(&spec.points) {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent {extent} must be positive")));
        }
        if points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{points} points per axis, at least {MIN_POINTS} required"
            )));
        }
        let spacing = match spec.topology {
            Topology::TruncatedBox => 2.0 * extent / (points - 1) as f64,
            Topology::PeriodicCircle => extent / points as f64,
        };
        axes.push(Axis { topology: spec.topology, extent, points, spacing });
    }
    let count: usize = axes.iter().map(|a| a.points).product();

    let mut potential = match &spec.potential {
        Potential::Zero => vec![0.0; count],
        Potential::NegCos => node_fn(&axes, |x| {
            -x.iter().zip(&axes).map(|(&xi, a)| a.phase(xi).cos()).sum::<f64>()
        }),
        Potential::Cosine(c) => node_fn(&axes, |x| {
            x.iter()
                .zip(&axes)
                .map(|(&xi, a)| {
                    let p = a.phase(xi);
                    c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * p).cos()).sum::<f64>()
                })
                .sum()
        }),
        Potential::Nodes(v) => {
            if v.len() != count {
                return Err(Error::InvalidGrid(format!(
                    "potential has {} values for {count} nodes",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("potential has non-finite values".into()));
    }

    let quad = tensor_quadrature(&axes);
    if spec.normalize_measure {
        let mass: f64 = quad.iter().zip(&potential).map(|(q, v)| q * (-v).exp()).sum();
        let shift = mass.ln();
        for v in potential.iter_mut() {
            *v += shift;
        }
    }
    let weights: Vec<f64> = quad.iter().zip(&potential).map(|(q, v)| q * (-v).exp()).collect();
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidGrid("reference weights must be positive and finite".into()));
    }

    Ok(Arc::new(Grid { topology: spec.topology, axes, potential, weights }))
}

fn node_fn(axes: &[Axis], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let count: usize = axes.iter().map(|a| a.points).product();
    let mut x = vec![0.0; axes.len()];
    (0..count)
        .map(|idx| {
            let mut rem = idx;
            for (a, axis) in axes.iter().enumerate() {
                x[a] = axis.coord(rem % axis.points);
                rem /= axis.points;
            }
            f(&x)
        })
        .collect()
}

fn tensor_quadrature(axes: &[Axis]) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = axes.iter().map(Axis::quadrature).collect();
    let count: usize = axes.iter().map(|a| a.points).product();
    (0..count)
        .map(|idx| {
            let mut rem = idx;
            let mut w = 1.0;
            for (a, axis) in axes.iter().enumerate() {
                w *= per_axis[a][rem % axis.points];
                rem /= axis.points;
            }
            w
        })
        .collect()
}

impl Grid {
    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// Distance in memory between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[..axis].iter().map(|a| a.points).product()
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        self.axes
            .iter()
            .map(|a| {
                let i = rem % a.points;
                rem /= a.points;
                i
            })
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        node_fn(&self.axes, f)
    }

    /// `∫ 1 dm`.
    pub fn reference_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when `V` is constant, so that `∇V ≡ 0`.
    pub fn is_flat(&self) -> bool {
        let v0 = self.potential[0];
        self.potential.iter().all(|v| (v - v0).abs() <= 1e-14 * (1.0 + v0.abs()))
    }

    /// True for nodes that lie on a face of a box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.topology == Topology::TruncatedBox
            && self.multi_index(idx).iter().zip(&self.axes).any(|(&i, a)| i == 0 || i + 1 == a.points)
    }

    /// Nodes at least `depth` cells away from every box face (all nodes on circles).
    pub fn is_interior(&self, idx: usize, depth: usize) -> bool {
        self.topology == Topology::PeriodicCircle
            || self
                .multi_index(idx)
                .iter()
                .zip(&self.axes)
                .all(|(&i, a)| i >= depth && i + depth < a.points)
    }

    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        ScalarField::new(grid.clone(), values)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Result<Self> {
        ScalarField::new(grid.clone(), vec![c; grid.node_count()])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Nonnegative field with unit mass under `m`.
#[derive(Clone, Debug)]
pub struct DensityField {
    field: ScalarField,
    mass_tolerance: f64,
}

impl DensityField {
    pub fn new(field: ScalarField) -> Result<Self> {
        Self::with_tolerance(field, MASS_TOLERANCE)
    }

    pub fn with_tolerance(field: ScalarField, mass_tolerance: f64) -> Result<Self> {
        if let Some(i) = field.values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidField(format!("negative density at node {i}")));
        }
        let mass = integrate(&field);
        if (mass - 1.0).abs() > mass_tolerance {
            return Err(Error::InvalidField(format!("density mass {mass} is not 1")));
        }
        Ok(DensityField { field, mass_tolerance })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.field.grid
    }

    pub fn mass_tolerance(&self) -> f64 {
        self.mass_tolerance
    }
}

/// `Σ φ_i w_i`.
pub fn integrate(phi: &ScalarField) -> f64 {
    phi.grid.integrate_values(&phi.values)
}

/// Divides by the mass. Input that already has unit mass to within a few
/// ulps is returned as is, which makes the operation idempotent.
pub fn normalize(phi: &ScalarField) -> Result<DensityField> {
    if phi.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidField("cannot normalize a field with negative values".into()));
    }
    let mass = integrate(phi);
    if !(mass > 0.0) {
        return Err(Error::InvalidField("cannot normalize a field with zero mass".into()));
    }
    let values = if (mass - 1.0).abs() <= 8.0 * f64::EPSILON {
        phi.values.clone()
    } else {
        phi.values.iter().map(|v| v / mass).collect()
    };
    DensityField::new(ScalarField { grid: phi.grid.clone(), values })
}

/// Indicator of `[a, b]` with value 1/2 on nodes that sit exactly on an
/// endpoint, so the trapezoid rule integrates it to `b - a` on aligned grids.
pub fn uniform_indicator(x: f64, a: f64, b: f64) -> f64 {
    let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
    if (x - a).abs() <= tol || (x - b).abs() <= tol {
        0.5
    } else if x > a && x < b {
        1.0
    } else {
        0.0
    }
}

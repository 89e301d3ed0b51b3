use std::sync::Arc;

use super::{Exponent, SpatialGrid};
use crate::error::{Error, Result};

/// An element of the discrete `L_p(D)^n`: `n` nodal fields on one grid.
///
/// Values are stored component-major: component `k` occupies
/// `values[k * nodes .. (k + 1) * nodes]`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<SpatialGrid>,
    n: usize,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.values == other.values && self.same_grid(other)
    }
}

impl GridFunction {
    pub fn zeros(grid: Arc<SpatialGrid>, n: usize) -> Self {
        let len = n * grid.num_nodes();
        GridFunction {
            grid,
            n,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Arc<SpatialGrid>, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * grid.num_nodes() {
            return Err(Error::GridMismatch(format!(
                "expected {} values for n = {n}, got {}",
                n * grid.num_nodes(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite grid value at position {bad}"
            )));
        }
        Ok(GridFunction { grid, n, values })
    }

    /// Samples `f(k, [x1, x2])` at every node of every component.
    pub fn from_fn(grid: Arc<SpatialGrid>, n: usize, mut f: impl FnMut(usize, [f64; 2]) -> f64) -> Self {
        let nodes = grid.num_nodes();
        let mut values = Vec::with_capacity(n * nodes);
        for k in 0..n {
            for idx in 0..nodes {
                values.push(f(k, grid.node(idx)));
            }
        }
        GridFunction { grid, n, values }
    }

    /// A single-cell indicator in component `k` at node `idx`.
    pub fn indicator(grid: Arc<SpatialGrid>, n: usize, k: usize, idx: usize) -> Self {
        let mut u = GridFunction::zeros(grid, n);
        let nodes = u.grid.num_nodes();
        u.values[k * nodes + idx] = 1.0;
        u
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let m = self.num_nodes();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.num_nodes();
        &mut self.values[k * m..(k + 1) * m]
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "component counts differ: {} vs {}",
                self.n, other.n
            )));
        }
        if !self.same_grid(other) {
            return Err(Error::GridMismatch("functions live on different grids".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &GridFunction) {
        debug_assert_eq!(self.values.len(), x.values.len());
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.values {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Discrete `L_p(D)^n` norm: `(Σ_k Σ_cells |u^k|^p |cell|)^{1/p}`, or the
/// nodal maximum for `p = ∞`.
pub fn lp_norm(u: &GridFunction, p: Exponent) -> f64 {
    lp_norm_values(u.values(), u.grid().cell_volume(), p)
}

pub(crate) fn lp_norm_values(values: &[f64], cell_volume: f64, p: Exponent) -> f64 {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    match p {
        Exponent::Infinity => max,
        _ if max == 0.0 => 0.0,
        Exponent::Finite(p) if p == 1.0 => values.iter().map(|v| v.abs()).sum::<f64>() * cell_volume,
        Exponent::Finite(p) if p == 2.0 => (values.iter().map(|v| v * v).sum::<f64>() * cell_volume).sqrt(),
        Exponent::Finite(p) => {
            // scaled by the max so large p neither overflows nor underflows
            let s: f64 = values.iter().map(|v| (v.abs() / max).powf(p)).sum();
            max * (s * cell_volume).powf(1.0 / p)
        }
    }
}

/// `⟨u, v⟩ = Σ_k ∫_D u^k v^k`.
pub fn duality_pairing(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    u.check_compatible(v)?;
    let s: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok(s * u.grid().cell_volume())
}

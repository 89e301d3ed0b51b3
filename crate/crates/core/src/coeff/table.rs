use std::borrow::Cow;
use std::sync::Arc;

use super::{CoeffExpr, Coupling, ParameterPoint};
use crate::grid::{SpatialGrid, TimeGrid};

/// Budget for per-step coupling tables before falling back to evaluation on demand.
const TABLE_BYTES: usize = 256 << 20;

#[derive(Debug)]
enum Sampled {
    Zero,
    Static(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
    Lazy(Vec<Vec<CoeffExpr>>),
}

/// `c₀`, `c₁` sampled at the nodes of a run's space-time grid.
///
/// A slice for step `j` is laid out as `[(k·n + l)·nodes + idx]`.
#[derive(Debug)]
pub struct CouplingTable {
    n: usize,
    grid: Arc<SpatialGrid>,
    time: TimeGrid,
    fields: [Sampled; 2],
}

fn sample(m: &[Vec<CoeffExpr>], grid: &SpatialGrid, t: f64) -> Vec<f64> {
    let nodes: Vec<[f64; 2]> = grid.nodes().collect();
    let mut out = Vec::with_capacity(m.len() * m.len() * nodes.len());
    for row in m {
        for e in row {
            match e.as_constant() {
                Some(c) => out.extend(std::iter::repeat(c).take(nodes.len())),
                None => out.extend(nodes.iter().map(|&x| e.eval(t, x))),
            }
        }
    }
    out
}

impl CouplingTable {
    pub fn new(a: &ParameterPoint, grid: Arc<SpatialGrid>, time: TimeGrid) -> Self {
        let n = a.n();
        let per_slice = n * n * grid.num_nodes() * std::mem::size_of::<f64>();
        let build = |m: &Vec<Vec<CoeffExpr>>| {
            if m.iter().flatten().all(CoeffExpr::is_zero) {
                Sampled::Zero
            } else if !m.iter().flatten().any(CoeffExpr::depends_on_time) {
                Sampled::Static(sample(m, &grid, time.t0()))
            } else if per_slice * (time.steps() + 1) <= TABLE_BYTES {
                Sampled::PerStep((0..=time.steps()).map(|j| sample(m, &grid, time.time(j))).collect())
            } else {
                Sampled::Lazy(m.clone())
            }
        };
        let fields = [build(&a.c0), build(&a.c1)];
        CouplingTable { n, grid, time, fields }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn is_zero(&self, which: Coupling) -> bool {
        matches!(self.fields[which.index()], Sampled::Zero)
    }

    /// Matrix field at step `j`, or `None` when identically zero.
    pub fn slice(&self, which: Coupling, j: usize) -> Option<Cow<'_, [f64]>> {
        match &self.fields[which.index()] {
            Sampled::Zero => None,
            Sampled::Static(v) => Some(Cow::Borrowed(v)),
            Sampled::PerStep(v) => Some(Cow::Borrowed(&v[j])),
            Sampled::Lazy(m) => Some(Cow::Owned(sample(m, &self.grid, self.time.time(j)))),
        }
    }

    /// `out += alpha · c_i(t_j) u` on component-major nodal vectors.
    pub fn apply_add(&self, which: Coupling, j: usize, u: &[f64], alpha: f64, out: &mut [f64]) {
        let Some(c) = self.slice(which, j) else { return };
        let m = self.grid.num_nodes();
        let n = self.n;
        for k in 0..n {
            let dst = &mut out[k * m..(k + 1) * m];
            for l in 0..n {
                let coef = &c[(k * n + l) * m..(k * n + l + 1) * m];
                let src = &u[l * m..(l + 1) * m];
                for idx in 0..m {
                    dst[idx] += alpha * coef[idx] * src[idx];
                }
            }
        }
    }
}

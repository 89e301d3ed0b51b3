//! Spatial and temporal discretization, and the discrete norms and pairings
//! used throughout the crate.
//!
//! Nodes are cell centres of a uniform tensor grid on an interval (N = 1) or a
//! rectangle (N = 2). Dirichlet data live on the faces as ghost constraints and
//! are never unknowns. All spatial integrals are midpoint sums weighted by the
//! (uniform) cell volume; time integrals over the history use the left
//! rectangle rule on the delay grid.

mod function;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use function::{duality_pairing, lp_norm, GridFunction};
pub(crate) use function::lp_norm_values;
pub use trajectory::{history_norm, traj_sup_norm, HistorySegment, Provenance, Trajectory};

/// An integrability exponent `p ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::ONE,
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            _ => {
                let p: f64 = s
                    .parse()
                    .map_err(|_| Error::Precondition(format!("cannot parse exponent '{s}'")))?;
                Exponent::new(p)
            }
        }
    }
}

/// One face of the boundary of a box domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub axis: usize,
    pub upper: bool,
}

impl BoundaryFace {
    /// Outward normal component along `axis` (±1).
    pub fn normal_sign(self) -> f64 {
        if self.upper {
            1.0
        } else {
            -1.0
        }
    }

    pub fn label(self) -> String {
        format!("x{}{}", self.axis + 1, if self.upper { '+' } else { '-' })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }
}

/// Uniform cell-centred grid on an interval or a rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    axes: Vec<Axis>,
    cell_volume: f64,
    boundary_tags: Vec<BoundaryFace>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (d, ax) in axes.iter().enumerate() {
            if !(ax.lo.is_finite() && ax.hi.is_finite()) || ax.hi <= ax.lo {
                return Err(Error::InvalidGrid(format!(
                    "axis x{} extent [{}, {}] is not a bounded nonempty interval",
                    d + 1,
                    ax.lo,
                    ax.hi
                )));
            }
            if ax.cells < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis x{} needs at least 2 cells, got {}",
                    d + 1,
                    ax.cells
                )));
            }
        }
        let cell_volume = axes.iter().map(Axis::spacing).product();
        let boundary_tags = (0..axes.len())
            .flat_map(|axis| {
                [false, true]
                    .into_iter()
                    .map(move |upper| BoundaryFace { axis, upper })
            })
            .collect();
        Ok(SpatialGrid {
            axes,
            cell_volume,
            boundary_tags,
        })
    }

    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::new(vec![Axis { lo, hi, cells }])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), cells: (usize, usize)) -> Result<Self> {
        Self::new(vec![
            Axis {
                lo: x.0,
                hi: x.1,
                cells: cells.0,
            },
            Axis {
                lo: y.0,
                hi: y.1,
                cells: cells.1,
            },
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.cells).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn boundary_tags(&self) -> &[BoundaryFace] {
        &self.boundary_tags
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    /// Linear node index; `x1` runs fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.axes[0].cells * j
    }

    /// Multi-index `(i, j)` of a node; `j = 0` in 1D.
    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        let nx = self.axes[0].cells;
        (idx % nx, idx / nx)
    }

    /// Coordinates `(x1, x2)` of a node centre; `x2 = 0` in 1D.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.multi_index(idx);
        let x1 = self.axes[0].center(i);
        let x2 = if self.dim() == 2 {
            self.axes[1].center(j)
        } else {
            0.0
        };
        [x1, x2]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.num_nodes()).map(|idx| self.node(idx))
    }

    /// Index of the node whose cell contains the domain centre.
    pub fn center_node(&self) -> usize {
        let i = self.axes[0].cells / 2;
        let j = if self.dim() == 2 {
            self.axes[1].cells / 2
        } else {
            0
        };
        self.index(i, j)
    }
}

/// Uniform time grid whose step divides the unit delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    dt: f64,
    steps: usize,
    steps_per_delay: usize,
}

const GRID_SNAP: f64 = 1e-9;

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidTimeGrid(format!(
                "need T > t0, got t0 = {t0}, T = {t_end}"
            )));
        }
        let per_delay = (1.0 / dt).round();
        if per_delay < 1.0 || (per_delay * dt - 1.0).abs() > GRID_SNAP {
            return Err(Error::InvalidTimeGrid(format!(
                "dt = {dt} does not divide the unit delay"
            )));
        }
        let steps = ((t_end - t0) / dt).round();
        if ((t_end - t0) - steps * dt).abs() > GRID_SNAP * (1.0 + (t_end - t0).abs()) {
            return Err(Error::InvalidTimeGrid(format!(
                "dt = {dt} does not divide T - t0 = {}",
                t_end - t0
            )));
        }
        Ok(TimeGrid {
            t0,
            t_end,
            dt,
            steps: steps as usize,
            steps_per_delay: per_delay as usize,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn steps_per_delay(&self) -> usize {
        self.steps_per_delay
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    /// Grid index of `t`; off-grid times are rejected, never interpolated.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-6 || j < 0.0 || j as usize > self.steps {
            return Err(Error::OffGrid { time: t });
        }
        Ok(j as usize)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|j| self.time(j))
    }

    /// Same origin and step, new horizon.
    pub fn with_end(&self, t_end: f64) -> Result<Self> {
        TimeGrid::new(self.t0, t_end, self.dt)
    }

    /// Same horizon, step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        TimeGrid::new(self.t0, self.t_end, self.dt / factor as f64)
    }
}

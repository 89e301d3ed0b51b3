use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeff::ParameterPoint;
use crate::error::{Error, Result};
use crate::grid::{HistorySegment, SpatialGrid, TimeGrid, Trajectory};
use crate::mild::{solve_monolithic, MildProblem};
use crate::propagator::{AdjointMode, EvolutionFamily, Scheme};

/// Samples of a scalar function on `t_i = i·dt`, `i = 0..=steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarTrajectory {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ScalarTrajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| i as f64 * self.dt)
    }

    /// Value at a grid time.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = (t / self.dt).round();
        if i < 0.0 || (t - i * self.dt).abs() > 1e-9 * self.dt.max(t.abs()) {
            return None;
        }
        self.values.get(i as usize).copied()
    }
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Cubic Lagrange interpolation of `y` (spacing `dt`) at `t ∈ [0, (len−1)·dt]`.
fn interpolate(y: &[f64], dt: f64, t: f64) -> f64 {
    let x = t / dt;
    let last = y.len() - 1;
    if last < 3 {
        let i = (x.floor() as usize).min(last.saturating_sub(1));
        let f = x - i as f64;
        return y[i] * (1.0 - f) + y[(i + 1).min(last)] * f;
    }
    let base = (x.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
    let mut out = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (x - (base + b) as f64) / (a as f64 - b as f64);
            }
        }
        out += l * y[base + a];
    }
    out
}

/// Solves `y′ = (−λ + c₀) y + c₁ y(t − 1)` with `y = history` on `[−1, 0]` by
/// the method of steps: exact exponential factor on each grid interval and
/// Gauss–Legendre quadrature of the delayed term, which is read from the
/// history or from the already computed previous unit interval.
pub fn oracle_method_of_steps(
    lambda: f64,
    c0: f64,
    c1: f64,
    history: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<ScalarTrajectory> {
    let time = TimeGrid::new(0.0, t_end, dt)?;
    let a = c0 - lambda;
    let steps = time.steps();
    let mut y = Vec::with_capacity(steps + 1);
    y.push(history(0.0));
    let growth = (a * dt).exp();
    for i in 0..steps {
        let (t0, t1) = (time.time(i), time.time(i + 1));
        let mut integral = 0.0;
        if c1 != 0.0 {
            for (xi, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let s = 0.5 * (t0 + t1) + 0.5 * dt * xi;
                let lag = s - 1.0;
                let delayed = if lag <= 0.0 { history(lag) } else { interpolate(&y, dt, lag) };
                integral += 0.5 * dt * w * (a * (t1 - s)).exp() * delayed;
            }
        }
        let next = growth * y[i] + c1 * integral;
        if !next.is_finite() {
            return Err(Error::Solve("method of steps overflowed".into()));
        }
        y.push(next);
    }
    Ok(ScalarTrajectory { dt, values: y })
}

/// Direct θ-stepping of the fully coupled system (Crank–Nicolson principal
/// part, coupling and delay explicit). First order in `dt`.
pub fn oracle_monolithic(a: &ParameterPoint, grid: Arc<SpatialGrid>, time: TimeGrid, h: &HistorySegment) -> Result<Trajectory> {
    let fam = EvolutionFamily::new(a, grid, time, Scheme::CrankNicolson, AdjointMode::Transpose)?;
    let problem = MildProblem::new(a, &fam)?;
    solve_monolithic(&problem, h, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_and_pure_decay() {
        let y = oracle_method_of_steps(1.0, 0.0, 1.0, &|_| 1.0, 3.0, 0.01).unwrap();
        assert!(y.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let y = oracle_method_of_steps(1.0, 0.3, 0.0, &|t| (0.7 * t).exp(), 2.0, 0.01).unwrap();
        for (t, v) in y.times().zip(&y.values) {
            assert!((v - (-0.7 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn first_interval_closed_form() {
        let y = oracle_method_of_steps(1.0, 0.0, 0.5, &|_| 1.0, 3.0, 1e-3).unwrap();
        for (t, v) in y.times().zip(&y.values).take(1001) {
            assert!((v - (0.5 + 0.5 * (-t).exp())).abs() < 1e-12, "{t}");
        }
        assert!((y.at(1.0).unwrap() - 0.683_939_720_585_721).abs() < 1e-12);
        // second interval by hand: y′ = −y + (1 + e^{−(t−1)})/4 on [1, 2]
        let y1 = 0.5 + 0.5 * (-1.0_f64).exp();
        let s = 1.0_f64;
        let exact = y1 * (-s).exp() + 0.25 * (1.0 - (-s).exp()) + 0.25 * s * (-s).exp();
        assert!((y.at(2.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn refinement_agrees() {
        let h = |t: f64| (3.0 * t).cos();
        let a = oracle_method_of_steps(2.0, 0.5, -0.8, &h, 3.0, 0.01).unwrap();
        let b = oracle_method_of_steps(2.0, 0.5, -0.8, &h, 3.0, 0.001).unwrap();
        for (t, v) in a.times().zip(&a.values) {
            assert!((v - b.at(t).unwrap()).abs() < 1e-8);
        }
    }
}

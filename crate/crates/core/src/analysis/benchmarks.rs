//! Reference problems shared by the tests, the acceptance suite and the CLI.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::coeff::{BcKind, Coupling, ParameterPoint};
use crate::error::Result;
use crate::grid::{duality_pairing, Exponent, GridFunction, HistorySegment, SpatialGrid, TimeGrid};
use crate::propagator::{AdjointMode, EvolutionFamily, Scheme};

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub point: ParameterPoint,
    pub grid: Arc<SpatialGrid>,
    pub time: TimeGrid,
    pub history: HistorySegment,
}

impl Benchmark {
    pub fn family(&self, scheme: Scheme, mode: AdjointMode) -> Result<EvolutionFamily> {
        EvolutionFamily::new(&self.point, self.grid.clone(), self.time, scheme, mode)
    }
}

/// Scalar heat on `(0, π)` with Dirichlet ends, constant coupling `c₀`, `c₁`
/// and `u(t, x) = y(t) sin x` on `[−1, 0]`. The solution stays on the `sin`
/// mode with `y′ = (c₀ − 1) y + c₁ y(t − 1)`.
pub fn eigenmode(cells: usize, dt: f64, t_end: f64, c0: f64, c1: f64, y: &dyn Fn(f64) -> f64) -> Result<Benchmark> {
    let grid = Arc::new(SpatialGrid::interval(0.0, PI, cells)?);
    let time = TimeGrid::new(0.0, t_end, dt)?;
    let point = ParameterPoint::heat(1, 1, BcKind::Dirichlet)
        .with_constant_coupling(Coupling::Instant, &[&[c0]])
        .with_constant_coupling(Coupling::Delayed, &[&[c1]])
        .with_k_bound(c0.abs().max(c1.abs()));
    let history = HistorySegment::from_fns(
        grid.clone(),
        1,
        time.steps_per_delay(),
        Exponent::Infinity,
        |_, x| y(0.0) * x[0].sin(),
        |tau, _, x| y(tau) * x[0].sin(),
    )?;
    Ok(Benchmark {
        point,
        grid,
        time,
        history,
    })
}

/// Coefficient of `u` along the `sin` mode, `⟨u, sin⟩ / ⟨sin, sin⟩`.
pub fn sine_coefficient(u: &GridFunction) -> Result<f64> {
    let s = GridFunction::from_fn(u.grid().clone(), 1, |_, x| x[0].sin());
    Ok(duality_pairing(u, &s)? / duality_pairing(&s, &s)?)
}

/// Two heat equations on `(0, π)`, Dirichlet, coupled through
/// `c₀ = [[0, ½], [½, 0]]` and the delay `c₁ = [[¼, 0], [−½, ¼]]`, with
/// `K = 1` (room for oscillations of amplitude ½) and constant history
/// `(sin x, sin 2x)`.
pub fn coupled_delay(cells: usize, dt: f64, t_end: f64) -> Result<Benchmark> {
    let grid = Arc::new(SpatialGrid::interval(0.0, PI, cells)?);
    let time = TimeGrid::new(0.0, t_end, dt)?;
    let point = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
        .with_constant_coupling(Coupling::Instant, &[&[0.0, 0.5], &[0.5, 0.0]])
        .with_constant_coupling(Coupling::Delayed, &[&[0.25, 0.0], &[-0.5, 0.25]])
        .with_k_bound(1.0);
    let head = GridFunction::from_fn(grid.clone(), 2, |k, x| ((k + 1) as f64 * x[0]).sin());
    let history = HistorySegment::constant(head, time.steps_per_delay());
    Ok(Benchmark {
        point,
        grid,
        time,
        history,
    })
}

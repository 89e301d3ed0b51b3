//! Mild solutions of the coupled delayed system.
//!
//! All solvers work on nodal vectors indexed by the steps of the propagator's
//! time grid, from an initial step `start` to the last step. The delayed
//! value `u(t_j − 1)` is read from the history tail while `j − start` is below
//! the number of steps per delay and from the computed states afterwards.

mod marching;
mod picard;
mod registry;

use serde::{Deserialize, Serialize};

use crate::coeff::{Coupling, CouplingTable, ParameterPoint};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Exponent, GridFunction, HistorySegment, Provenance, TimeGrid, Trajectory};
use crate::grid::lp_norm_values;
use crate::propagator::Propagator;

pub use marching::{solve_marching, solve_monolithic};
pub use picard::{solve_picard, PicardConfig, PicardOutcome};
pub use registry::{MarchingSolver, MildSolution, MildSolver, MonolithicSolver, PicardSolver, SolverRegistry, SolverSettings};

/// Quadrature rule for `∫ U(t, ζ) f(ζ) dζ` on step-aligned nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    LeftRectangle,
    #[default]
    Trapezoid,
}

/// A parameter point together with the propagator of its higher-order part
/// and its coupling fields sampled on the propagator's grid.
pub struct MildProblem<'a> {
    a: &'a ParameterPoint,
    fam: &'a dyn Propagator,
    table: CouplingTable,
}

impl<'a> MildProblem<'a> {
    pub fn new(a: &'a ParameterPoint, fam: &'a dyn Propagator) -> Result<Self> {
        if a.n() != fam.n() {
            return Err(Error::GridMismatch(format!(
                "parameter point has {} components, propagator {}",
                a.n(),
                fam.n()
            )));
        }
        if a.dim() != fam.grid().dim() {
            return Err(Error::GridMismatch("parameter point and grid dimensions differ".into()));
        }
        let table = CouplingTable::new(a, fam.grid().clone(), *fam.time());
        Ok(MildProblem { a, fam, table })
    }

    pub fn point(&self) -> &ParameterPoint {
        self.a
    }

    pub fn propagator(&self) -> &dyn Propagator {
        self.fam
    }

    pub fn time(&self) -> &TimeGrid {
        self.fam.time()
    }

    pub(crate) fn table(&self) -> &CouplingTable {
        &self.table
    }

    fn check_history(&self, h: &HistorySegment, start: usize) -> Result<()> {
        let time = self.time();
        if h.steps_per_delay() != time.steps_per_delay() {
            return Err(Error::GridMismatch(format!(
                "history has {} samples per delay, time grid {}",
                h.steps_per_delay(),
                time.steps_per_delay()
            )));
        }
        if h.n() != self.fam.n() || **h.grid() != **self.fam.grid() {
            return Err(Error::GridMismatch("history does not live on the run grid".into()));
        }
        if start >= time.steps() {
            return Err(Error::Precondition(format!(
                "initial step {start} leaves no room before the horizon"
            )));
        }
        Ok(())
    }

    /// `u(t_j − 1)` given the states `u[i]` at steps `start + i`.
    fn delayed<'b>(&self, h: &'b HistorySegment, u: &'b [Vec<f64>], start: usize, j: usize) -> &'b [f64] {
        let i = j - start;
        let s = h.steps_per_delay();
        if i < s {
            h.tail()[i].values()
        } else {
            &u[i - s]
        }
    }

    /// `g_j = c₀(t_j) u_j + c₁(t_j) u(t_j − 1)`.
    fn forcing(&self, h: &HistorySegment, u: &[Vec<f64>], start: usize, j: usize) -> Vec<f64> {
        let mut g = vec![0.0; u[0].len()];
        self.table.apply_add(Coupling::Instant, j, &u[j - start], 1.0, &mut g);
        self.table.apply_add(Coupling::Delayed, j, self.delayed(h, u, start, j), 1.0, &mut g);
        g
    }

    /// `w_j = U(t_j, t_start) u₀⁽¹⁾`.
    fn free_term(&self, h: &HistorySegment, start: usize) -> Result<Vec<Vec<f64>>> {
        let steps = self.time().steps();
        let mut out = Vec::with_capacity(steps - start + 1);
        let mut x = h.head().values().to_vec();
        out.push(x.clone());
        for j in start..steps {
            self.fam.step(j, &mut x)?;
            out.push(x.clone());
        }
        Ok(out)
    }

    fn trajectory(&self, h: &HistorySegment, start: usize, states: Vec<Vec<f64>>, prov: Provenance) -> Result<Trajectory> {
        let grid = self.fam.grid().clone();
        let n = self.fam.n();
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                GridFunction::from_values(grid.clone(), n, v).map_err(|_| {
                    Error::Solve(format!("solution is not finite at t = {}", self.time().time(start + i)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory::from_history_and_states(self.time(), start, h, states, prov))
    }
}

/// `S_j ≈ ∫_{t_start}^{t_j} U(t_j, ζ) g(ζ) dζ` for every step, by the one-step
/// recursion of the composite rule (identical to the rule itself since `U`
/// is a product of one-step operators).
fn duhamel_sweep(
    fam: &dyn Propagator,
    start: usize,
    quad: Quadrature,
    mut g: impl FnMut(usize) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let steps = fam.time().steps();
    let dt = fam.time().dt();
    let len = fam.n() * fam.grid().num_nodes();
    let mut out = Vec::with_capacity(steps - start + 1);
    out.push(vec![0.0; len]);
    let mut gj = g(start)?;
    for j in start..steps {
        let mut x = out[j - start].clone();
        let w = match quad {
            Quadrature::Trapezoid => 0.5 * dt,
            Quadrature::LeftRectangle => dt,
        };
        for (a, b) in x.iter_mut().zip(&gj) {
            *a += w * b;
        }
        fam.step(j, &mut x)?;
        out.push(x);
        let next = g(j + 1)?;
        if quad == Quadrature::Trapezoid {
            let last = out.last_mut().expect("just pushed");
            for (a, b) in last.iter_mut().zip(&next) {
                *a += 0.5 * dt * b;
            }
        }
        gj = next;
    }
    Ok(out)
}

/// `∫_{t₀}^{t} U(t, ζ) f(ζ) dζ` with `f` sampled at the grid nodes from `t₀`.
pub fn duhamel_integral(fam: &dyn Propagator, t: f64, f: &[GridFunction], quad: Quadrature) -> Result<GridFunction> {
    let time = fam.time();
    let jt = time.index_of(t)?;
    if f.len() < jt + 1 {
        return Err(Error::Precondition(format!(
            "integrand has {} samples, {} needed up to t = {t}",
            f.len(),
            jt + 1
        )));
    }
    let dt = time.dt();
    let len = fam.n() * fam.grid().num_nodes();
    let mut s = vec![0.0; len];
    for j in 0..jt {
        let w = if quad == Quadrature::Trapezoid { 0.5 * dt } else { dt };
        for (a, b) in s.iter_mut().zip(f[j].values()) {
            *a += w * b;
        }
        fam.step(j, &mut s)?;
        if quad == Quadrature::Trapezoid {
            for (a, b) in s.iter_mut().zip(f[j + 1].values()) {
                *a += 0.5 * dt * b;
            }
        }
    }
    GridFunction::from_values(fam.grid().clone(), fam.n(), s)
}

/// `𝔊(v)` on nodal vectors: the Duhamel integral of
/// `c₀(v + w) + c₁ u(· − 1)` where `u = v + w` past the first delay interval.
fn gothic_g(problem: &MildProblem, h: &HistorySegment, w: &[Vec<f64>], v: &[Vec<f64>], start: usize, quad: Quadrature) -> Result<Vec<Vec<f64>>> {
    let u: Vec<Vec<f64>> = v
        .iter()
        .zip(w)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    duhamel_sweep(problem.fam, start, quad, |j| Ok(problem.forcing(h, &u, start, j)))
}

/// The contraction `𝔊_{a,u₀}` applied to `v` (a trajectory with `v(t_start) = 0`).
pub fn gothic_g_apply(problem: &MildProblem, h: &HistorySegment, v: &Trajectory, quad: Quadrature) -> Result<Trajectory> {
    let start = usize::try_from(v.initial_step())
        .map_err(|_| Error::Precondition("iterate starts before the time grid".into()))?;
    problem.check_history(h, start)?;
    let states: Vec<Vec<f64>> = v.solution().map(|(_, f)| f.values().to_vec()).collect();
    if states.len() != problem.time().steps() - start + 1 {
        return Err(Error::GridMismatch("iterate does not span the time grid".into()));
    }
    if states[0].iter().any(|&x| x != 0.0) {
        return Err(Error::Precondition("the iterate must vanish at the initial time".into()));
    }
    let w = problem.free_term(h, start)?;
    let out = gothic_g(problem, h, &w, &states, start, quad)?;
    let zero = HistorySegment::zeros(h.grid().clone(), h.n(), h.steps_per_delay());
    problem.trajectory(&zero, start, out, v.provenance())
}

/// `d_μ(u, v) = sup_t e^{−μ(t − t_start)} ‖u(t) − v(t)‖_{L_p}` over the solution part.
pub fn weighted_metric(u: &Trajectory, v: &Trajectory, mu: f64, p: Exponent) -> Result<f64> {
    if u.initial_step() != v.initial_step() || u.last_step() != v.last_step() || u.dt() != v.dt() {
        return Err(Error::GridMismatch("trajectories live on different time grids".into()));
    }
    let mut t0 = None;
    let mut best = 0.0_f64;
    for ((t, a), (_, b)) in u.solution().zip(v.solution()) {
        a.check_compatible(b)?;
        let t0 = *t0.get_or_insert(t);
        best = best.max((-mu * (t - t0)).exp() * lp_norm(&a.sub(b), p));
    }
    Ok(best)
}

/// Largest `‖u(t_j) − (w_j + 𝔊(u − w)_j)‖_{L_p}` over the solution part: how
/// far a trajectory is from satisfying the integral equation.
pub fn integral_residual(problem: &MildProblem, h: &HistorySegment, u: &Trajectory, quad: Quadrature, p: Exponent) -> Result<f64> {
    let start = usize::try_from(u.initial_step())
        .map_err(|_| Error::Precondition("trajectory starts before the time grid".into()))?;
    problem.check_history(h, start)?;
    let states: Vec<Vec<f64>> = u.solution().map(|(_, f)| f.values().to_vec()).collect();
    let w = problem.free_term(h, start)?;
    let v: Vec<Vec<f64>> = states
        .iter()
        .zip(&w)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let gv = gothic_g(problem, h, &w, &v, start, quad)?;
    let vol = problem.fam.grid().cell_volume();
    Ok(v.iter()
        .zip(&gv)
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            lp_norm_values(&d, vol, p)
        })
        .fold(0.0, f64::max))
}

/// Re-solves from `R(u)[θ]` with `solver` and returns
/// `sup_{t ∈ [θ, T]} ‖u(t) − u_θ(t)‖_{L_p}`.
pub fn translation_check(
    problem: &MildProblem,
    u: &Trajectory,
    theta: f64,
    solver: &dyn MildSolver,
    p: Exponent,
) -> Result<f64> {
    let time = problem.time();
    let k = time.index_of(theta)?;
    if k >= time.steps() {
        return Err(Error::Precondition(format!("theta = {theta} must lie before the horizon")));
    }
    let datum = u.restart_datum(k as i64, Exponent::Infinity)?;
    let re = solver.solve(problem, &datum, k)?.trajectory;
    let mut best = 0.0_f64;
    for (t, a) in re.solution() {
        best = best.max(lp_norm(&a.sub(u.at_time(t)?), p));
    }
    Ok(best)
}

/// Small dense solve `M x = b` with partial pivoting; `m` is row-major `n × n`.
pub(crate) fn solve_small(n: usize, m: &mut [f64], b: &mut [f64]) -> Result<()> {
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))
            .expect("nonempty range");
        if m[piv * n + c] == 0.0 {
            return Err(Error::Solve("singular local coupling matrix".into()));
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            b.swap(c, piv);
        }
        for r in c + 1..n {
            let f = m[r * n + c] / m[c * n + c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
            b[r] -= f * b[c];
        }
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= m[r * n + k] * b[k];
        }
        b[r] = s / m[r * n + r];
    }
    Ok(())
}

#[cfg(test)]
mod tests;

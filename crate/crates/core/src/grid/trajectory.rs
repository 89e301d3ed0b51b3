use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{lp_norm, Exponent, GridFunction, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};

/// Initial datum `u₀ = (u₀⁽¹⁾, u₀⁽²⁾)`.
///
/// `tail[i]` is the history at `τ_i = -1 + i·dt`, `i = 0..S` with `S·dt = 1`:
/// every sample is the left endpoint of its delay sub-interval, so rough
/// `L_r` histories are never sampled across a jump at `τ = 0`.
#[derive(Clone, Debug)]
pub struct HistorySegment {
    head: GridFunction,
    tail: Vec<GridFunction>,
    r: Exponent,
}

impl HistorySegment {
    pub fn new(head: GridFunction, tail: Vec<GridFunction>, r: Exponent) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::Empty("history tail"));
        }
        for f in &tail {
            head.check_compatible(f)?;
        }
        Ok(HistorySegment { head, tail, r })
    }

    /// Samples `head(k, x)` and `tail(τ, k, x)` on the delay grid with `steps_per_delay` samples.
    pub fn from_fns(
        grid: Arc<SpatialGrid>,
        n: usize,
        steps_per_delay: usize,
        r: Exponent,
        head: impl Fn(usize, [f64; 2]) -> f64,
        tail: impl Fn(f64, usize, [f64; 2]) -> f64,
    ) -> Result<Self> {
        let head = GridFunction::from_fn(grid.clone(), n, head);
        let tail = (0..steps_per_delay)
            .map(|i| {
                let tau = -1.0 + i as f64 / steps_per_delay as f64;
                GridFunction::from_fn(grid.clone(), n, |k, x| tail(tau, k, x))
            })
            .collect();
        HistorySegment::new(head, tail, r)
    }

    /// Head `u` with the constant history `u` on `(-1, 0)`.
    pub fn constant(u: GridFunction, steps_per_delay: usize) -> Self {
        let tail = vec![u.clone(); steps_per_delay];
        HistorySegment {
            head: u,
            tail,
            r: Exponent::Infinity,
        }
    }

    pub fn zeros(grid: Arc<SpatialGrid>, n: usize, steps_per_delay: usize) -> Self {
        Self::constant(GridFunction::zeros(grid, n), steps_per_delay)
    }

    pub fn head(&self) -> &GridFunction {
        &self.head
    }

    pub fn tail(&self) -> &[GridFunction] {
        &self.tail
    }

    pub fn r(&self) -> Exponent {
        self.r
    }

    pub fn steps_per_delay(&self) -> usize {
        self.tail.len()
    }

    pub fn n(&self) -> usize {
        self.head.n()
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        self.head.grid()
    }

    /// Product-space norm `‖u₀⁽¹⁾‖_{L_p} + ‖u₀⁽²⁾‖_{L_r((-1,0), L_p)}`.
    pub fn norm(&self, p: Exponent) -> f64 {
        lp_norm(&self.head, p) + history_norm(self, self.r, p).unwrap_or(0.0)
    }

    /// `α·self + β·other`, sample by sample.
    pub fn combine(&self, alpha: f64, other: &HistorySegment, beta: f64) -> Result<Self> {
        if self.tail.len() != other.tail.len() {
            return Err(Error::GridMismatch("history lengths differ".into()));
        }
        let lin = |a: &GridFunction, b: &GridFunction| {
            let mut out = a.scaled(alpha);
            out.axpy(beta, b);
            out
        };
        self.head.check_compatible(&other.head)?;
        Ok(HistorySegment {
            head: lin(&self.head, &other.head),
            tail: self
                .tail
                .iter()
                .zip(&other.tail)
                .map(|(a, b)| lin(a, b))
                .collect(),
            r: self.r,
        })
    }
}

/// `‖h‖_{L_r((-1,0), L_p)}` by the composite left-rectangle rule on the delay grid.
pub fn history_norm(h: &HistorySegment, r: Exponent, p: Exponent) -> Result<f64> {
    if h.tail.is_empty() {
        return Err(Error::Empty("history tail"));
    }
    let norms = h.tail.iter().map(|f| lp_norm(f, p));
    Ok(match r {
        Exponent::Infinity => norms.fold(0.0, f64::max),
        Exponent::Finite(r) => {
            let dtau = 1.0 / h.tail.len() as f64;
            (norms.map(|v| v.powf(r)).sum::<f64>() * dtau).powf(1.0 / r)
        }
    })
}

/// Which route produced a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Picard,
    Marching,
    Oracle,
}

/// A solution sampled on the time grid, history part included.
///
/// `states[i]` sits at step `first_step + i` of the originating time grid,
/// i.e. at time `t0 + (first_step + i)·dt`; steps before the initial step
/// hold the history tail.
#[derive(Clone, Debug)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    first_step: i64,
    steps_per_delay: usize,
    states: Vec<GridFunction>,
    provenance: Provenance,
}

impl Trajectory {
    /// Assembles a trajectory that starts at step `start` of `time` from the
    /// history `h` and the computed states at steps `start..=end`.
    pub fn from_history_and_states(
        time: &TimeGrid,
        start: usize,
        h: &HistorySegment,
        computed: Vec<GridFunction>,
        provenance: Provenance,
    ) -> Self {
        let s = h.steps_per_delay();
        let mut states = Vec::with_capacity(s + computed.len());
        states.extend(h.tail().iter().cloned());
        states.extend(computed);
        Trajectory {
            t0: time.t0(),
            dt: time.dt(),
            first_step: start as i64 - s as i64,
            steps_per_delay: s,
            states,
            provenance,
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn first_step(&self) -> i64 {
        self.first_step
    }

    pub fn last_step(&self) -> i64 {
        self.first_step + self.states.len() as i64 - 1
    }

    /// Step at which the solution (not the history) begins.
    pub fn initial_step(&self) -> i64 {
        self.first_step + self.steps_per_delay as i64
    }

    pub fn time_of_step(&self, j: i64) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn at_step(&self, j: i64) -> Option<&GridFunction> {
        let i = j - self.first_step;
        if i < 0 {
            return None;
        }
        self.states.get(i as usize)
    }

    fn step_of(&self, t: f64) -> Result<i64> {
        let x = (t - self.t0) / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-6 {
            return Err(Error::OffGrid { time: t });
        }
        Ok(j as i64)
    }

    pub fn at_time(&self, t: f64) -> Result<&GridFunction> {
        let j = self.step_of(t)?;
        self.at_step(j).ok_or(Error::OffGrid { time: t })
    }

    /// Time grid spanning the whole trajectory, history included.
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(
            self.time_of_step(self.first_step),
            self.time_of_step(self.last_step()),
            self.dt,
        )
    }

    /// The solution from its initial step on, paired with times.
    pub fn solution(&self) -> impl Iterator<Item = (f64, &GridFunction)> + '_ {
        let skip = self.steps_per_delay;
        self.states
            .iter()
            .enumerate()
            .skip(skip)
            .map(move |(i, u)| (self.time_of_step(self.first_step + i as i64), u))
    }

    /// `R(u)[θ] = (u(θ), u(· + θ)|_(-1,0))`, with `θ` given as a step index.
    pub fn restart_datum(&self, theta_step: i64, r: Exponent) -> Result<HistorySegment> {
        let s = self.steps_per_delay as i64;
        let head = self
            .at_step(theta_step)
            .ok_or(Error::OffGrid {
                time: self.time_of_step(theta_step),
            })?
            .clone();
        let tail = (0..s)
            .map(|i| {
                self.at_step(theta_step - s + i).cloned().ok_or(Error::OffGrid {
                    time: self.time_of_step(theta_step - s + i),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        HistorySegment::new(head, tail, r)
    }
}

/// `max_{t ∈ [t0, t1] ∩ grid} ‖w(t)‖_{L_q}`.
pub fn traj_sup_norm(w: &Trajectory, t0: f64, t1: f64, q: Exponent) -> Result<f64> {
    let eps = 1e-9 * w.dt;
    let mut seen = false;
    let mut best = 0.0_f64;
    for (i, u) in w.states.iter().enumerate() {
        let t = w.time_of_step(w.first_step + i as i64);
        if t >= t0 - eps && t <= t1 + eps {
            seen = true;
            best = best.max(lp_norm(u, q));
        }
    }
    if !seen {
        return Err(Error::Empty("time window"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn history_norms() {
        let g = Arc::new(SpatialGrid::interval(0.0, 1.0, 20).unwrap());
        let s = 1000;
        let zero = HistorySegment::zeros(g.clone(), 1, s);
        assert_eq!(history_norm(&zero, Exponent::TWO, Exponent::TWO).unwrap(), 0.0);

        let one = GridFunction::from_fn(g.clone(), 1, |_, _| 1.0);
        let h = HistorySegment::constant(one, s);
        assert!((history_norm(&h, Exponent::Infinity, Exponent::TWO).unwrap() - 1.0).abs() < 1e-14);

        // h(τ) = e^τ u with ‖u‖ = 1, r = 2: exact value ((1 - e^{-2})/2)^{1/2}
        let h = HistorySegment::from_fns(g, 1, s, Exponent::TWO, |_, _| 1.0, |tau, _, _| tau.exp()).unwrap();
        let exact = ((1.0 - (-2.0_f64).exp()) / 2.0).sqrt();
        let got = history_norm(&h, Exponent::TWO, Exponent::TWO).unwrap();
        assert!((exact - 0.6575).abs() < 1e-4);
        // left rectangle: first-order error
        assert!((got - exact).abs() < 1.0 / s as f64);
    }

    #[test]
    fn sup_norm_over_window() {
        let g = Arc::new(SpatialGrid::interval(0.0, PI, 100).unwrap());
        let tg = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let sin = GridFunction::from_fn(g.clone(), 1, |_, x| x[0].sin());
        let h = HistorySegment::constant(sin.clone(), tg.steps_per_delay());
        let states = tg.times().map(|t| sin.scaled((-t).exp())).collect();
        let w = Trajectory::from_history_and_states(&tg, 0, &h, states, Provenance::Oracle);
        let top = traj_sup_norm(&w, 0.0, 1.0, Exponent::TWO).unwrap();
        assert!((top - (PI / 2.0).sqrt()).abs() < 1e-12);
        let single = traj_sup_norm(&w, 0.5, 0.5, Exponent::TWO).unwrap();
        assert!((single - (-0.5_f64).exp() * (PI / 2.0).sqrt()).abs() < 1e-12);
        assert!(traj_sup_norm(&w, 2.0, 3.0, Exponent::TWO).is_err());

        let zero = Trajectory::from_history_and_states(
            &tg,
            0,
            &HistorySegment::zeros(g.clone(), 1, 100),
            vec![GridFunction::zeros(g, 1); 101],
            Provenance::Oracle,
        );
        assert_eq!(traj_sup_norm(&zero, 0.0, 1.0, Exponent::Infinity).unwrap(), 0.0);
    }

    #[test]
    fn restart_datum_reads_shifted_window() {
        let g = Arc::new(SpatialGrid::interval(0.0, 1.0, 4).unwrap());
        let tg = TimeGrid::new(0.0, 2.0, 0.25).unwrap();
        let h = HistorySegment::from_fns(g.clone(), 1, 4, Exponent::Infinity, |_, _| 0.0, |tau, _, _| tau).unwrap();
        let states = tg.times().map(|t| GridFunction::from_fn(g.clone(), 1, |_, _| t)).collect();
        let w = Trajectory::from_history_and_states(&tg, 0, &h, states, Provenance::Oracle);
        assert_eq!(w.first_step(), -4);
        let r = w.restart_datum(2, Exponent::Infinity).unwrap();
        assert_eq!(r.head().values()[0], 0.5);
        let taus: Vec<f64> = r.tail().iter().map(|f| f.values()[0]).collect();
        assert_eq!(taus, vec![-0.5, -0.25, 0.0, 0.25]);
    }
}

use serde::{Deserialize, Serialize};

use super::{gothic_g, MildProblem, Quadrature};
use crate::error::{Error, Result};
use crate::grid::{lp_norm_values, Exponent, HistorySegment, Provenance, Trajectory};

/// Settings of the global Picard iteration in the metric `d_μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub mu: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub quadrature: Quadrature,
    /// Double `μ` and restart when two ratios reach 1, instead of failing.
    pub adaptive: bool,
    /// Spatial norm inside `d_μ`.
    pub norm: Exponent,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            mu: 1.0,
            tol: 1e-10,
            max_iters: 200,
            quadrature: Quadrature::Trapezoid,
            adaptive: true,
            norm: Exponent::TWO,
        }
    }
}

impl PicardConfig {
    /// `μ = 4 n² K M e^{γ T}`, twice the contraction threshold; `K = 0`
    /// (nothing to contract) falls back to `μ = 1`.
    pub fn auto_mu(n: usize, k: f64, m: f64, gamma: f64, horizon: f64) -> f64 {
        let mu = 4.0 * (n * n) as f64 * k * m * (gamma * horizon).exp();
        if mu > 0.0 && mu.is_finite() {
            mu
        } else {
            1.0
        }
    }

    /// The contraction factor `2 n² K M e^{γ T} / μ` the proof guarantees.
    pub fn ratio_bound(&self, n: usize, k: f64, m: f64, gamma: f64, horizon: f64) -> f64 {
        2.0 * (n * n) as f64 * k * m * (gamma * horizon).exp() / self.mu
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// `d_μ(v_{j+1}, v_j) / d_μ(v_j, v_{j−1})`, recorded while the previous
    /// distance is above round-off level.
    pub ratios: Vec<f64>,
    /// The weight actually used (after any adaptive doubling).
    pub mu: f64,
    pub final_distance: f64,
    /// `sup_t ‖v_{j+1}(t) − v_j(t)‖` at the last sweep.
    pub final_sup: f64,
}

const MAX_RESTARTS: usize = 30;
/// Ratios are only recorded while the previous distance exceeds this
/// fraction of the first one; below it they measure round-off.
const RATIO_FLOOR: f64 = 1e-11;

/// Iterates `v_{j+1} = 𝔊(v_j)` from `v₀ = 0` until both `d_μ(v_{j+1}, v_j)`
/// and the unweighted sup difference fall below `tol`, and returns
/// `u = v* + U(·, t_start) u₀⁽¹⁾` preceded by the history.
pub fn solve_picard(problem: &MildProblem, h: &HistorySegment, cfg: &PicardConfig, start: usize) -> Result<PicardOutcome> {
    problem.check_history(h, start)?;
    if !(cfg.mu > 0.0 && cfg.tol > 0.0) {
        return Err(Error::Precondition("picard needs mu > 0 and tol > 0".into()));
    }
    let time = *problem.time();
    let vol = problem.propagator().grid().cell_volume();
    let w = problem.free_term(h, start)?;
    let len = w[0].len();
    let mut mu = cfg.mu;

    'restart: for _ in 0..=MAX_RESTARTS {
        let mut v = vec![vec![0.0; len]; w.len()];
        let mut prev: Option<f64> = None;
        let mut first: Option<f64> = None;
        let mut ratios = Vec::new();
        let mut bad = 0;
        for it in 1..=cfg.max_iters {
            let next = gothic_g(problem, h, &w, &v, start, cfg.quadrature)?;
            let (mut d, mut sup) = (0.0_f64, 0.0_f64);
            for (i, (a, b)) in next.iter().zip(&v).enumerate() {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let nrm = lp_norm_values(&diff, vol, cfg.norm);
                sup = sup.max(nrm);
                d = d.max((-mu * (time.time(start + i) - time.time(start))).exp() * nrm);
            }
            if !d.is_finite() {
                return Err(Error::Solve("picard iterate is not finite".into()));
            }
            let first = *first.get_or_insert(d);
            if let Some(p) = prev {
                if p > RATIO_FLOOR * first {
                    let r = d / p;
                    ratios.push(r);
                    if r >= 1.0 {
                        bad += 1;
                    }
                }
            }
            v = next;
            if d < cfg.tol && sup < cfg.tol {
                let states = v
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                    .collect();
                return Ok(PicardOutcome {
                    trajectory: problem.trajectory(h, start, states, Provenance::Picard)?,
                    iterations: it,
                    ratios,
                    mu,
                    final_distance: d,
                    final_sup: sup,
                });
            }
            if bad >= 2 {
                if cfg.adaptive {
                    mu *= 2.0;
                    continue 'restart;
                }
                return Err(Error::NonContraction { mu, ratios });
            }
            prev = Some(d);
            if it == cfg.max_iters {
                return Err(Error::NoConvergence { iterations: it, last: d });
            }
        }
        return Err(Error::NoConvergence {
            iterations: cfg.max_iters,
            last: prev.unwrap_or(f64::NAN),
        });
    }
    Err(Error::NonContraction { mu, ratios: Vec::new() })
}

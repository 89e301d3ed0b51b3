use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::smoothing_exponent;
use super::schedule::waiting_time;
use crate::coeff::{weakstar_oscillate, OscillationMode, ParameterPoint, PerturbationTargets};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Exponent, HistorySegment, TimeGrid};
use crate::mild::{MildProblem, MildSolver};
use crate::propagator::Propagator;

/// Pass rule for a sequence of errors along increasing `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRule {
    /// Each error may exceed its predecessor by at most this factor.
    pub slack: f64,
    /// Required `err_last / err_first`.
    pub max_final_ratio: f64,
    /// Errors below this count as zero.
    pub zero: f64,
}

impl Default for TrendRule {
    fn default() -> Self {
        TrendRule {
            slack: 1.5,
            max_final_ratio: 0.2,
            zero: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendDecision {
    pub nonincreasing: bool,
    pub final_ratio: f64,
    pub pass: bool,
}

impl TrendRule {
    pub fn judge(&self, errors: &[f64]) -> TrendDecision {
        let nonincreasing = errors.windows(2).all(|w| w[1] <= self.slack * w[0] + self.zero);
        let (first, last) = match (errors.first(), errors.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => (0.0, 0.0),
        };
        let (final_ratio, small) = if first <= self.zero {
            (0.0, errors.iter().all(|&e| e <= self.zero))
        } else {
            let r = last / first;
            (r, r <= self.max_final_ratio)
        };
        TrendDecision {
            nonincreasing,
            final_ratio,
            pass: nonincreasing && small,
        }
    }
}

/// What a weak-* continuous-dependence study perturbs and measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub ms: Vec<u32>,
    pub amp: f64,
    pub mode: OscillationMode,
    #[serde(default)]
    pub targets: PerturbationTargets,
    pub q: Exponent,
    pub window: (f64, f64),
    /// Exponents of the initial datum; with `strict` the study refuses
    /// `N/2 (1/p − 1/q) ≥ 1/r′`, otherwise it records a warning.
    pub p: Exponent,
    pub r: Exponent,
    pub strict: bool,
    #[serde(default)]
    pub rule: TrendRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub ms: Vec<u32>,
    pub errors: Vec<f64>,
    pub window: (f64, f64),
    pub norm: Exponent,
    pub decision: TrendDecision,
    pub warnings: Vec<String>,
}

/// `[Θ + 1 + dt, T]` with `Θ` the waiting time for `r₀`; needs `T > Θ + 1`.
pub fn regularizing_window(big_n: usize, r0: Exponent, time: &TimeGrid) -> Result<(f64, f64)> {
    let theta = waiting_time(big_n, r0)? as f64;
    let start = time.t0() + theta + 1.0 + time.dt();
    if time.t_end() < start - 1e-9 * time.dt() {
        return Err(Error::Precondition(format!(
            "the windowed study needs T > Θ + 1 = {}, got T = {}",
            theta + 1.0,
            time.t_end() - time.t0()
        )));
    }
    Ok((start, time.t_end()))
}

/// Thread pool honoring `PDDE_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("PDDE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            b = b.num_threads(n);
        }
    }
    b.build().map_err(|e| Error::Solve(format!("thread pool: {e}")))
}

/// Solves the base problem and each oscillated point `a_m`, and records
/// `err_m = sup_{t ∈ window} ‖u_m(t) − u(t)‖_{L_q}`.
///
/// Only `c₀`/`c₁` are perturbed, so every member shares the base propagator.
pub fn weakstar_study(
    base: &ParameterPoint,
    fam: &dyn Propagator,
    h: &HistorySegment,
    spec: &StudySpec,
    solver: &dyn MildSolver,
) -> Result<ConvergenceStudy> {
    if spec.ms.is_empty() || spec.ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("oscillation indices must be nonempty and strictly increasing".into()));
    }
    let time = *fam.time();
    let (lo, hi) = spec.window;
    if !(lo <= hi && lo >= time.t0() - 1e-12 && hi <= time.t_end() + 1e-9) {
        return Err(Error::Precondition(format!("window [{lo}, {hi}] is outside the time grid")));
    }
    let mut warnings = Vec::new();
    let alpha = smoothing_exponent(fam.grid().dim(), spec.p, spec.q);
    if alpha != 0.0 && !(alpha < spec.r.conjugate().reciprocal()) {
        let msg = format!("N/2 (1/p - 1/q) = {alpha} is not below 1/r' for r = {}", spec.r);
        if spec.strict {
            return Err(Error::Precondition(msg));
        }
        warnings.push(msg);
    }
    let points = spec
        .ms
        .iter()
        .map(|&m| weakstar_oscillate(base, m, spec.amp, spec.mode, &spec.targets, fam.grid(), &time))
        .collect::<Result<Vec<_>>>()?;

    let solve = |a: &ParameterPoint| -> Result<crate::grid::Trajectory> {
        let problem = MildProblem::new(a, fam)?;
        Ok(solver.solve(&problem, h, 0)?.trajectory)
    };
    let reference = solve(base)?;
    let pool = thread_pool()?;
    let errors = pool.install(|| {
        points
            .par_iter()
            .map(|a| {
                let u = solve(a)?;
                let mut err = 0.0_f64;
                for (t, v) in u.solution() {
                    if t >= lo - 1e-9 * time.dt() && t <= hi + 1e-9 * time.dt() {
                        err = err.max(lp_norm(&v.sub(reference.at_time(t)?), spec.q));
                    }
                }
                Ok(err)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(ConvergenceStudy {
        ms: spec.ms.clone(),
        decision: spec.rule.judge(&errors),
        errors,
        window: spec.window,
        norm: spec.q,
        warnings,
    })
}

use serde::{Deserialize, Serialize};

use super::bounds::{gronwall_bound, smoothing_bound_mbar, smoothing_exponent, BoundInputs, EstimateReport};
use super::schedule::regularization_schedule;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Exponent, GridFunction, HistorySegment, Trajectory};
use crate::propagator::Propagator;

/// `sup_t ‖u(t)‖_{L_p}` against the Gronwall bound times `‖u₀‖`, with the
/// product norm `‖u₀⁽¹⁾‖_{L_p} + ‖u₀⁽²⁾‖_{L_r(L_p)}`.
pub fn verify_gronwall(traj: &Trajectory, h: &HistorySegment, inputs: &BoundInputs) -> Result<EstimateReport> {
    let g = gronwall_bound(inputs.m, inputs.gamma, inputs.k, inputs.n, inputs.t)?;
    let u0 = datum_norm(h, inputs.p, inputs.r)?;
    let measured = traj.solution().map(|(_, u)| lp_norm(u, inputs.p)).fold(0.0, f64::max);
    Ok(EstimateReport::new("gronwall", g * u0, measured, inputs.clone()))
}

fn datum_norm(h: &HistorySegment, p: Exponent, r: Exponent) -> Result<f64> {
    Ok(lp_norm(h.head(), p) + crate::grid::history_norm(h, r, p)?)
}

/// The `L_p → L_q` smoothing estimate along a solved trajectory.
///
/// When `N/2 (1/p − 1/q) < 1/r′` this checks
/// `‖u(t)‖_q ≤ M̄ t^{−α} ‖u₀‖` on `(0, 1]` and, through a restart at `t − 1`,
/// `‖u(t)‖_q ≤ 2 G(T) M̄ ‖u₀‖` beyond; `measured` is the largest
/// `‖u(t)‖_q / w(t)` with `w` the matching time weight, so the report compares
/// it with `M̄ ‖u₀‖`.
///
/// Otherwise the flat bound on `[Θ + 1, T]` is checked with a computable
/// stand-in `G(T) Π_m 2 M̄(p_m, p_{m+1})` for the existence-only constant.
pub fn verify_smoothing(traj: &Trajectory, inputs: &BoundInputs) -> Result<EstimateReport> {
    let (p, q, r) = (inputs.p, inputs.q, inputs.r);
    if p.reciprocal() < q.reciprocal() {
        return Err(Error::Precondition(format!("need p <= q, got p = {p}, q = {q}")));
    }
    let h = traj.restart_datum(traj.initial_step(), r)?;
    let u0 = datum_norm(&h, p, r)?;
    let t0 = traj.time_of_step(traj.initial_step());
    let g = gronwall_bound(inputs.m, inputs.gamma, inputs.k, inputs.n, inputs.t)?;
    let alpha = smoothing_exponent(inputs.big_n, p, q);
    let direct = alpha == 0.0 || alpha < r.conjugate().reciprocal();
    if direct {
        let mbar = smoothing_bound_mbar(inputs.m, inputs.gamma, inputs.k, inputs.n, inputs.big_n, p, q, r)?;
        let mut measured = 0.0_f64;
        for (t, u) in traj.solution() {
            let s = t - t0;
            if s <= 0.0 {
                continue;
            }
            let nrm = lp_norm(u, q);
            let w = if s <= 1.0 + 1e-12 { s.powf(alpha) } else { 1.0 / (2.0 * g) };
            measured = measured.max(nrm * w);
        }
        return Ok(EstimateReport::new("smoothing_mbar", mbar * u0, measured, inputs.clone()));
    }
    if q.is_infinite() || p.is_infinite() {
        return Err(Error::Precondition("the scheduled bound needs finite p < q".into()));
    }
    let schedule = regularization_schedule(inputs.big_n, p, q, r)?;
    let mut tilde = g;
    for w in schedule.chain.windows(2) {
        tilde *= 2.0 * smoothing_bound_mbar(inputs.m, inputs.gamma, inputs.k, inputs.n, inputs.big_n, w[0], w[1], r)?;
    }
    let from = t0 + schedule.theta as f64 + 1.0;
    if inputs.t + t0 < from - 1e-9 {
        return Err(Error::Precondition(format!(
            "the scheduled bound needs T > Θ + 1 = {}",
            schedule.theta + 1
        )));
    }
    let measured = traj
        .solution()
        .filter(|(t, _)| *t >= from - 1e-9)
        .map(|(_, u)| lp_norm(u, q))
        .fold(0.0, f64::max);
    Ok(EstimateReport::new("smoothing_scheduled", tilde * u0, measured, inputs.clone()))
}

/// Least-squares slope of `log(‖U(t, t₀)u₀‖_{L_∞} / ‖u₀‖_{L_1})` against `log(t − t₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub points: Vec<(f64, f64)>,
}

/// Propagates `u0` from the start of the family's time grid and fits the
/// `L_1 → L_∞` decay over the steps `from..=to`; the heat-kernel value is `−N/2`.
pub fn smoothing_slope(fam: &dyn Propagator, u0: &GridFunction, from: usize, to: usize) -> Result<SlopeFit> {
    if from == 0 || from >= to || to > fam.time().steps() {
        return Err(Error::Precondition(format!("bad step window {from}..={to}")));
    }
    let l1 = lp_norm(u0, Exponent::ONE);
    if l1 == 0.0 {
        return Err(Error::Precondition("datum must be nonzero".into()));
    }
    let dt = fam.time().dt();
    let mut u = u0.values().to_vec();
    let mut points = Vec::with_capacity(to - from + 1);
    for j in 0..to {
        fam.step(j, &mut u)?;
        if j + 1 >= from {
            let sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            points.push((((j + 1) as f64 * dt).ln(), (sup / l1).ln()));
        }
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let expected = -(fam.grid().dim() as f64) / 2.0;
    Ok(SlopeFit {
        slope,
        expected,
        relative_error: ((slope - expected) / expected).abs(),
        points,
    })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Exponent;

/// Constants feeding the explicit bounds. `m` and `gamma` are normally the
/// fitted values from [`estimate_m_gamma`](crate::propagator::estimate_m_gamma).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: f64,
    pub gamma: f64,
    pub k: f64,
    pub n: usize,
    /// Spatial dimension.
    pub big_n: usize,
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
    pub t: f64,
}

/// A theoretical bound next to the measured quantity it controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub bound_name: String,
    pub theoretical: f64,
    pub measured: f64,
    /// `theoretical − measured`; negative means the bound failed.
    pub margin: f64,
    pub inputs: BoundInputs,
}

impl EstimateReport {
    pub fn new(bound_name: &str, theoretical: f64, measured: f64, inputs: BoundInputs) -> Self {
        EstimateReport {
            bound_name: bound_name.to_string(),
            theoretical,
            measured,
            margin: theoretical - measured,
            inputs,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.theoretical
    }
}

/// `⌈x⌉`, forgiving round-off just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn check_mg(m: f64, gamma: f64, k: f64) -> Result<()> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::Precondition(format!("M must be finite and >= 1, got {m}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Precondition(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Precondition(format!("K must be finite and >= 0, got {k}")));
    }
    Ok(())
}

/// `(M e^γ (1 + n²K) exp(n²K M e^γ))^{⌈T⌉}`.
pub fn gronwall_bound(m: f64, gamma: f64, k: f64, n: usize, t: f64) -> Result<f64> {
    check_mg(m, gamma, k)?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("T must be >= 0, got {t}")));
    }
    let nk = (n * n) as f64 * k;
    let me = m * gamma.exp();
    let base = me * (1.0 + nk) * (nk * me).exp();
    Ok(base.powf(ceil_tol(t)))
}

/// `N/2 (1/p − 1/q)`.
pub fn smoothing_exponent(big_n: usize, p: Exponent, q: Exponent) -> f64 {
    big_n as f64 / 2.0 * (p.reciprocal() - q.reciprocal())
}

/// The constant `M̄` of the `L_p → L_q` estimate on `(0, 1]`:
///
/// `M e^γ (1 + e^γ(1+n²K) n²K M exp(n²K M e^γ) / (1 − α) + n²K / (1 − α r′)^{1/r′})`
/// with `α = N/2 (1/p − 1/q)`. Needs `α < 1/r′`.
pub fn smoothing_bound_mbar(
    m: f64,
    gamma: f64,
    k: f64,
    n: usize,
    big_n: usize,
    p: Exponent,
    q: Exponent,
    r: Exponent,
) -> Result<f64> {
    check_mg(m, gamma, k)?;
    if p.reciprocal() < q.reciprocal() {
        return Err(Error::Precondition(format!("need p <= q, got p = {p}, q = {q}")));
    }
    let alpha = smoothing_exponent(big_n, p, q);
    let inv_rp = r.conjugate().reciprocal();
    let (d1, d2) = if alpha == 0.0 {
        (1.0, 1.0)
    } else {
        if !(alpha < inv_rp) {
            return Err(Error::Precondition(format!(
                "N/2 (1/p - 1/q) = {alpha} is not below 1/r' = {inv_rp}; use a regularization schedule"
            )));
        }
        (1.0 - alpha, (1.0 - alpha / inv_rp).powf(inv_rp))
    };
    let nk = (n * n) as f64 * k;
    let eg = gamma.exp();
    Ok(m * eg * (1.0 + eg * (1.0 + nk) * nk * m * (nk * m * eg).exp() / d1 + nk / d2))
}

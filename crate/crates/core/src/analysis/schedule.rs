use serde::{Deserialize, Serialize};

use super::bounds::{ceil_tol, smoothing_exponent};
use crate::error::{Error, Result};
use crate::grid::Exponent;

/// The bootstrap `p = p₀ < … < p_{m₀} = q` and waiting time `Θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
    pub r_prime: Exponent,
    pub big_n: usize,
    pub m0: usize,
    pub theta: usize,
    pub chain: Vec<Exponent>,
    /// Every consecutive pair obeys `N/2 (1/p_m − 1/p_{m+1}) ≤ 1/(2r′)`.
    pub valid: bool,
}

impl ScheduleReport {
    /// `N/2 (1/p_m − 1/p_{m+1})` for each step.
    pub fn step_exponents(&self) -> Vec<f64> {
        self.chain
            .windows(2)
            .map(|w| smoothing_exponent(self.big_n, w[0], w[1]))
            .collect()
    }
}

/// `Θ = ⌈N r₀/(r₀−1)⌉` (`= N` for `r₀ = ∞`).
pub fn waiting_time(big_n: usize, r0: Exponent) -> Result<usize> {
    if r0.as_f64() <= 1.0 {
        return Err(Error::Precondition(format!("r0 must exceed 1, got {r0}")));
    }
    Ok(ceil_tol(big_n as f64 / r0.conjugate().reciprocal()) as usize)
}

/// `m₀ = ⌈N r′⌉` steps of equal size in `1/p_m`. `q = ∞` is accepted as a
/// proxy for large `q`.
pub fn regularization_schedule(big_n: usize, p: Exponent, q: Exponent, r0: Exponent) -> Result<ScheduleReport> {
    if big_n == 0 {
        return Err(Error::Precondition("N must be positive".into()));
    }
    if p.is_infinite() || p.as_f64() < 1.0 {
        return Err(Error::InvalidExponent(p.as_f64()));
    }
    if !(p.as_f64() < q.as_f64()) {
        return Err(Error::Precondition(format!("need p < q, got p = {p}, q = {q}")));
    }
    let theta = waiting_time(big_n, r0)?;
    let r_prime = r0.conjugate();
    let m0 = ceil_tol(big_n as f64 * r_prime.as_f64()) as usize;
    let (a, b) = (p.reciprocal(), q.reciprocal());
    let chain: Vec<Exponent> = (0..=m0)
        .map(|m| match m {
            0 => p,
            m if m == m0 => q,
            m => {
                let inv = a - (a - b) * m as f64 / m0 as f64;
                Exponent::Finite(1.0 / inv)
            }
        })
        .collect();
    let limit = 0.5 * r_prime.reciprocal();
    let mut report = ScheduleReport {
        p,
        q,
        r: r0,
        r_prime,
        big_n,
        m0,
        theta,
        chain,
        valid: false,
    };
    report.valid = report
        .chain
        .windows(2)
        .all(|w| w[0].as_f64() < w[1].as_f64())
        && report
            .step_exponents()
            .iter()
            .all(|&e| e <= limit * (1.0 + 1e-12));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(x: f64) -> Exponent {
        Exponent::new(x).unwrap()
    }

    #[test]
    fn examples() {
        let s = regularization_schedule(1, Exponent::ONE, e(4.0), e(2.0)).unwrap();
        assert_eq!((s.theta, s.m0), (2, 2));
        let s = regularization_schedule(2, Exponent::ONE, e(4.0), Exponent::Infinity).unwrap();
        assert_eq!((s.theta, s.m0), (2, 2));
        let s = regularization_schedule(1, Exponent::ONE, Exponent::Infinity, e(2.0)).unwrap();
        assert_eq!(s.chain, vec![Exponent::ONE, e(2.0), Exponent::Infinity]);
        assert!(s.valid);
        assert!(s.step_exponents().iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert!(regularization_schedule(1, Exponent::ONE, e(2.0), Exponent::ONE).is_err());
        assert!(regularization_schedule(1, e(2.0), e(2.0), e(2.0)).is_err());
        assert_eq!(waiting_time(3, e(3.0)).unwrap(), 5);
    }

    proptest! {
        #[test]
        fn chains_validate(n in 1usize..4, p in 1.0..10.0f64, dq in 0.01..50.0f64, r0 in 1.01..20.0f64, inf in any::<bool>()) {
            let r0 = if inf { Exponent::Infinity } else { e(r0) };
            let s = regularization_schedule(n, e(p), e(p + dq), r0).unwrap();
            prop_assert!(s.valid);
            prop_assert_eq!(s.chain.len(), s.m0 + 1);
            // m₀ depends only on (N, r₀)
            let other = regularization_schedule(n, Exponent::ONE, Exponent::Infinity, r0).unwrap();
            prop_assert_eq!(other.m0, s.m0);
        }

        #[test]
        fn m0_good_for_larger_r(n in 1usize..4, r1 in 1.01..20.0f64, dr in 0.0..100.0f64) {
            let s1 = regularization_schedule(n, Exponent::ONE, e(8.0), e(r1)).unwrap();
            let s2 = regularization_schedule(n, Exponent::ONE, e(8.0), e(r1 + dr)).unwrap();
            prop_assert!(s2.m0 <= s1.m0);
            // the coarser chain of r₁ still satisfies the half-condition for r₂
            let limit2 = 0.5 * s2.r_prime.reciprocal();
            prop_assert!(s1.step_exponents().iter().all(|&x| x <= limit2 * (1.0 + 1e-12)));
        }
    }
}

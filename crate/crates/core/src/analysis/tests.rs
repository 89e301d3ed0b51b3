use std::sync::Arc;

use super::benchmarks::{coupled_delay, eigenmode, sine_coefficient};
use super::*;
use crate::coeff::{BcKind, OscillationMode, ParameterPoint, PerturbationTargets};
use crate::grid::{Exponent, GridFunction, HistorySegment, SpatialGrid, TimeGrid};
use crate::mild::{MarchingSolver, MildProblem, MildSolver, Quadrature};
use crate::propagator::{estimate_m_gamma, AdjointMode, EvolutionFamily, Scheme};

fn marching() -> MarchingSolver {
    MarchingSolver {
        quadrature: Quadrature::Trapezoid,
    }
}

fn inputs(m: f64, gamma: f64, k: f64, n: usize, p: Exponent, q: Exponent, t: f64) -> BoundInputs {
    BoundInputs {
        m,
        gamma,
        k,
        n,
        big_n: 1,
        p,
        q,
        r: Exponent::Infinity,
        t,
    }
}

#[test]
fn trend_rule() {
    let rule = TrendRule::default();
    assert!(rule.judge(&[1.0, 0.5, 0.6, 0.1]).pass);
    assert!(!rule.judge(&[1.0, 0.5, 0.8, 0.1]).pass);
    assert!(!rule.judge(&[1.0, 0.9, 0.8, 0.7]).pass);
    assert!(rule.judge(&[0.0, 0.0, 0.0]).pass);
}

#[test]
fn eigenmode_matches_method_of_steps() {
    let y0 = |_: f64| 1.0;
    let b = eigenmode(100, 0.01, 3.0, 0.0, 0.5, &y0).unwrap();
    let fam = b.family(Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
    let p = MildProblem::new(&b.point, &fam).unwrap();
    let u = marching().solve(&p, &b.history, 0).unwrap().trajectory;
    let y = oracle_method_of_steps(1.0, 0.0, 0.5, &y0, 3.0, 0.01).unwrap();
    let mut worst = 0.0_f64;
    for (t, v) in u.solution() {
        worst = worst.max((sine_coefficient(v).unwrap() - y.at(t).unwrap()).abs());
    }
    assert!(worst < 1e-3, "{worst}");
    let mono = oracle_monolithic(&b.point, b.grid.clone(), b.time, &b.history).unwrap();
    let gap = mono
        .solution()
        .map(|(t, v)| (sine_coefficient(v).unwrap() - y.at(t).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(gap < 2e-2, "{gap}");
}

#[test]
fn gronwall_holds_on_benchmark() {
    let b = coupled_delay(30, 0.01, 3.0).unwrap();
    let fam = b.family(Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
    let fit = estimate_m_gamma(&fam, Exponent::TWO, Exponent::TWO, 6, 1).unwrap();
    let p = MildProblem::new(&b.point, &fam).unwrap();
    let u = marching().solve(&p, &b.history, 0).unwrap().trajectory;
    let inp = inputs(fit.m, fit.gamma, 1.0, 2, Exponent::TWO, Exponent::TWO, 3.0);
    let rep = verify_gronwall(&u, &b.history, &inp).unwrap();
    assert!(rep.passed() && rep.margin > 0.0);
    let rep = verify_smoothing(&u, &inp).unwrap();
    assert!(rep.passed(), "{rep:?}");
    let inp = inputs(fit.m, fit.gamma, 1.0, 2, Exponent::ONE, Exponent::TWO, 3.0);
    let rep = verify_smoothing(&u, &inp).unwrap();
    assert!(rep.passed(), "{rep:?}");

    let zero = HistorySegment::zeros(b.grid.clone(), 2, 100);
    let u0 = marching().solve(&p, &zero, 0).unwrap().trajectory;
    let rep = verify_gronwall(&u0, &zero, &inp).unwrap();
    assert_eq!(rep.measured, 0.0);
    assert!(rep.passed());
}

#[test]
fn scheduled_smoothing_needs_long_horizon() {
    // N = 1, r = 3/2: 1/r' = 1/3 < N/2 (1 − 1/64), so the chain is needed, Θ = 3
    let mut inp = inputs(1.0, 0.0, 1.0, 2, Exponent::ONE, Exponent::new(64.0).unwrap(), 3.0);
    inp.r = Exponent::new(1.5).unwrap();
    let solved = |t_end: f64| {
        let b = coupled_delay(20, 0.02, t_end).unwrap();
        let fam = b.family(Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
        let p = MildProblem::new(&b.point, &fam).unwrap();
        marching().solve(&p, &b.history, 0).unwrap().trajectory
    };
    assert!(verify_smoothing(&solved(3.0), &inp).is_err());
    inp.t = 5.0;
    let rep = verify_smoothing(&solved(5.0), &inp).unwrap();
    assert_eq!(rep.bound_name, "smoothing_scheduled");
    assert!(rep.passed());
}

#[test]
fn slope_of_the_heat_kernel() {
    let grid = Arc::new(SpatialGrid::interval(0.0, 1.0, 1000).unwrap());
    let a = ParameterPoint::heat(1, 1, BcKind::Dirichlet);
    let time = TimeGrid::new(0.0, 0.01, 1e-4).unwrap();
    let fam = EvolutionFamily::new(&a, grid.clone(), time, Scheme::ImplicitEuler, AdjointMode::Transpose).unwrap();
    let u0 = GridFunction::indicator(grid.clone(), 1, 0, grid.center_node());
    let fit = smoothing_slope(&fam, &u0, 10, 100).unwrap();
    assert!(fit.relative_error < 0.1, "{fit:?}");
}

fn study_spec(amp: f64, mode: OscillationMode, ms: Vec<u32>, window: (f64, f64)) -> StudySpec {
    StudySpec {
        ms,
        amp,
        mode,
        targets: PerturbationTargets::default(),
        q: Exponent::TWO,
        window,
        p: Exponent::TWO,
        r: Exponent::Infinity,
        strict: true,
        rule: TrendRule::default(),
    }
}

#[test]
fn weakstar_studies() {
    let b = coupled_delay(30, 0.005, 3.0).unwrap();
    let fam = b.family(Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
    let window = regularizing_window(1, Exponent::Infinity, &b.time).unwrap();
    assert!((window.0 - 2.005).abs() < 1e-12);
    let solver = marching();
    let ms = vec![1, 2, 4, 8, 16];

    let zero = weakstar_study(&b.point, &fam, &b.history, &study_spec(0.0, OscillationMode::Time, ms.clone(), window), &solver).unwrap();
    assert!(zero.errors.iter().all(|&e| e == 0.0));
    assert!(zero.decision.pass);

    let osc = weakstar_study(&b.point, &fam, &b.history, &study_spec(0.5, OscillationMode::Time, ms.clone(), window), &solver).unwrap();
    assert!(osc.decision.pass, "{:?}", osc.errors);

    let shift = weakstar_study(&b.point, &fam, &b.history, &study_spec(0.5, OscillationMode::Constant, ms.clone(), window), &solver).unwrap();
    assert!(!shift.decision.pass, "{:?}", shift.errors);

    assert!(weakstar_study(&b.point, &fam, &b.history, &study_spec(0.6, OscillationMode::Time, ms, window), &solver).is_err());
    let short = TimeGrid::new(0.0, 2.0, 0.01).unwrap();
    assert!(regularizing_window(1, Exponent::Infinity, &short).is_err());
}

#[test]
fn monolithic_is_first_order() {
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let b = coupled_delay(40, dt, 2.0).unwrap();
            let fam = b.family(Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
            let p = MildProblem::new(&b.point, &fam).unwrap();
            let u = marching().solve(&p, &b.history, 0).unwrap().trajectory;
            let m = oracle_monolithic(&b.point, b.grid.clone(), b.time, &b.history).unwrap();
            u.solution()
                .map(|(t, v)| crate::grid::lp_norm(&v.sub(m.at_time(t).unwrap()), Exponent::TWO))
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        let rate = w[0] / w[1];
        assert!((1.6..2.5).contains(&rate), "{errs:?}");
    }
}

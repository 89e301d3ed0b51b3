use std::f64::consts::PI;
use std::sync::Arc;

use super::*;
use crate::coeff::BcKind;
use crate::grid::{traj_sup_norm, SpatialGrid};
use crate::propagator::{propagate, AdjointMode, EvolutionFamily, IdentityPropagator, Scheme};

fn sine_grid(cells: usize) -> Arc<SpatialGrid> {
    Arc::new(SpatialGrid::interval(0.0, PI, cells).unwrap())
}

fn coupled() -> ParameterPoint {
    ParameterPoint::heat(2, 1, BcKind::Dirichlet)
        .with_constant_coupling(Coupling::Instant, &[&[0.0, 0.5], &[0.5, 0.0]])
        .with_constant_coupling(Coupling::Delayed, &[&[0.25, 0.0], &[-0.5, 0.25]])
        .with_k_bound(0.5)
}

fn coupled_history(grid: &Arc<SpatialGrid>, s: usize) -> HistorySegment {
    HistorySegment::from_fns(
        grid.clone(),
        2,
        s,
        Exponent::Infinity,
        |k, x| if k == 0 { x[0].sin() } else { 0.5 * (2.0 * x[0]).sin() },
        |tau, k, x| if k == 0 { (1.0 + tau) * x[0].sin() } else { (2.0 * x[0]).sin() },
    )
    .unwrap()
}

fn family(a: &ParameterPoint, grid: Arc<SpatialGrid>, t_end: f64, dt: f64) -> EvolutionFamily {
    let time = TimeGrid::new(0.0, t_end, dt).unwrap();
    EvolutionFamily::new(a, grid, time, Scheme::CrankNicolson, AdjointMode::Transpose).unwrap()
}

#[test]
fn duhamel_of_zero_and_constants() {
    let g = sine_grid(10);
    let time = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
    let id = IdentityPropagator::new(g.clone(), 1, time);
    let zero = vec![GridFunction::zeros(g.clone(), 1); 101];
    assert_eq!(duhamel_integral(&id, 1.0, &zero, Quadrature::Trapezoid).unwrap().max_abs(), 0.0);
    let c = GridFunction::from_fn(g, 1, |_, x| 1.0 + x[0]);
    let f = vec![c.clone(); 101];
    for quad in [Quadrature::Trapezoid, Quadrature::LeftRectangle] {
        let s = duhamel_integral(&id, 0.7, &f, quad).unwrap();
        let err = s.sub(&c.scaled(0.7)).max_abs();
        assert!(err <= 0.01 * c.max_abs(), "{quad:?}: {err}");
    }
}

#[test]
fn duhamel_of_eigenmode() {
    let g = sine_grid(200);
    let a = ParameterPoint::heat(1, 1, BcKind::Dirichlet);
    let fam = family(&a, g.clone(), 1.0, 1e-3);
    let sin = GridFunction::from_fn(g, 1, |_, x| x[0].sin());
    let f = vec![sin.clone(); 1001];
    let s = duhamel_integral(&fam, 1.0, &f, Quadrature::Trapezoid).unwrap();
    let exact = sin.scaled(1.0 - (-1.0_f64).exp());
    assert!(lp_norm(&s.sub(&exact), Exponent::TWO) < 1e-3);
}

#[test]
fn gothic_g_examples() {
    let g = sine_grid(16);
    let time = TimeGrid::new(0.0, 2.0, 0.01).unwrap();
    let id = IdentityPropagator::new(g.clone(), 1, time);
    let h = HistorySegment::from_fns(g.clone(), 1, 100, Exponent::TWO, |_, x| x[0].sin(), |_, _, _| 0.3).unwrap();
    let zero_v = Trajectory::from_history_and_states(
        &time,
        0,
        &HistorySegment::zeros(g.clone(), 1, 100),
        vec![GridFunction::zeros(g.clone(), 1); 201],
        Provenance::Picard,
    );
    let free = ParameterPoint::heat(1, 1, BcKind::Dirichlet);
    let p = MildProblem::new(&free, &id).unwrap();
    let out = gothic_g_apply(&p, &h, &zero_v, Quadrature::Trapezoid).unwrap();
    assert_eq!(traj_sup_norm(&out, 0.0, 2.0, Exponent::Infinity).unwrap(), 0.0);

    let kappa = 0.7;
    let a = free.clone().with_constant_coupling(Coupling::Instant, &[&[kappa]]).with_k_bound(1.0);
    let p = MildProblem::new(&a, &id).unwrap();
    let out = gothic_g_apply(&p, &h, &zero_v, Quadrature::Trapezoid).unwrap();
    for (t, u) in out.solution() {
        let want = h.head().scaled(kappa * t);
        assert!(u.sub(&want).max_abs() < 1e-12);
    }

    let bad = Trajectory::from_history_and_states(
        &time,
        0,
        &HistorySegment::zeros(g.clone(), 1, 100),
        vec![GridFunction::from_fn(g, 1, |_, _| 1.0); 201],
        Provenance::Picard,
    );
    assert!(matches!(gothic_g_apply(&p, &h, &bad, Quadrature::Trapezoid), Err(Error::Precondition(_))));
}

#[test]
fn weighted_metric_examples() {
    let g = sine_grid(8);
    let time = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
    let zero_h = HistorySegment::zeros(g.clone(), 1, 10);
    // unit L2 norm on (0, π)
    let unit = GridFunction::from_fn(g.clone(), 1, |_, _| 1.0 / PI.sqrt());
    let mu = 2.5;
    let make = |f: &dyn Fn(f64) -> f64| {
        let states = time.times().map(|t| unit.scaled(f(t))).collect();
        Trajectory::from_history_and_states(&time, 0, &zero_h, states, Provenance::Oracle)
    };
    let zero = make(&|_| 0.0);
    let one = make(&|_| 1.0);
    let grow = make(&|t| (mu * t).exp());
    assert_eq!(weighted_metric(&one, &one, mu, Exponent::TWO).unwrap(), 0.0);
    assert!((weighted_metric(&one, &zero, mu, Exponent::TWO).unwrap() - 1.0).abs() < 1e-12);
    assert!((weighted_metric(&grow, &zero, mu, Exponent::TWO).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn uncoupled_picard_is_free_propagation() {
    let g = sine_grid(40);
    let a = ParameterPoint::heat(2, 1, BcKind::Dirichlet);
    let fam = family(&a, g.clone(), 2.0, 0.01);
    let p = MildProblem::new(&a, &fam).unwrap();
    let h = coupled_history(&g, 100);
    let out = solve_picard(&p, &h, &PicardConfig::default(), 0).unwrap();
    assert_eq!(out.iterations, 1);
    let direct = propagate(&fam, 0.0, 2.0, h.head()).unwrap();
    assert_eq!(out.trajectory.at_time(2.0).unwrap(), &direct);
    let m = solve_marching(&p, &h, Quadrature::Trapezoid, 0).unwrap();
    assert_eq!(m.at_time(2.0).unwrap(), &direct);
    let mono = solve_monolithic(&p, &h, 0).unwrap();
    assert_eq!(mono.at_time(2.0).unwrap(), &direct);
}

#[test]
fn picard_matches_marching_and_satisfies_the_integral_equation() {
    let g = sine_grid(40);
    let a = coupled();
    let fam = family(&a, g.clone(), 3.0, 0.01);
    let p = MildProblem::new(&a, &fam).unwrap();
    let h = coupled_history(&g, 100);
    for quad in [Quadrature::Trapezoid, Quadrature::LeftRectangle] {
        let cfg = PicardConfig {
            mu: PicardConfig::auto_mu(2, 0.5, 1.0, 0.0, 3.0),
            quadrature: quad,
            ..PicardConfig::default()
        };
        let pic = solve_picard(&p, &h, &cfg, 0).unwrap();
        let mar = solve_marching(&p, &h, quad, 0).unwrap();
        let gap = pic
            .trajectory
            .solution()
            .map(|(t, u)| lp_norm(&u.sub(mar.at_time(t).unwrap()), Exponent::TWO))
            .fold(0.0, f64::max);
        assert!(gap < 1e-8, "{quad:?}: {gap}");
        assert!(pic.ratios.iter().all(|&r| r <= 0.55), "{:?}", pic.ratios);
        let res = integral_residual(&p, &h, &pic.trajectory, quad, Exponent::TWO).unwrap();
        assert!(res <= 5.0 * cfg.tol, "{res}");
        // history is carried along unchanged
        assert_eq!(pic.trajectory.at_time(-0.5).unwrap(), &h.tail()[50]);
    }
}

#[test]
fn picard_unique_across_mu() {
    let g = sine_grid(20);
    let a = coupled();
    let fam = family(&a, g.clone(), 3.0, 0.02);
    let p = MildProblem::new(&a, &fam).unwrap();
    let h = coupled_history(&g, 50);
    let run = |mu| {
        let cfg = PicardConfig { mu, ..PicardConfig::default() };
        solve_picard(&p, &h, &cfg, 0).unwrap().trajectory
    };
    let (u1, u2) = (run(4.0), run(16.0));
    let gap = u1
        .solution()
        .map(|(t, u)| lp_norm(&u.sub(u2.at_time(t).unwrap()), Exponent::TWO))
        .fold(0.0, f64::max);
    assert!(gap <= 2e-10, "{gap}");
}

#[test]
fn non_contraction_detected_or_adapted() {
    let g = sine_grid(10);
    let a = ParameterPoint::heat(1, 1, BcKind::Neumann)
        .with_constant_coupling(Coupling::Instant, &[&[20.0]])
        .with_k_bound(20.0);
    let fam = family(&a, g.clone(), 1.0, 0.01);
    let p = MildProblem::new(&a, &fam).unwrap();
    let h = HistorySegment::constant(GridFunction::from_fn(g, 1, |_, _| 1.0), 100);
    let strict = PicardConfig {
        mu: 0.01,
        adaptive: false,
        ..PicardConfig::default()
    };
    assert!(matches!(solve_picard(&p, &h, &strict, 0), Err(Error::NonContraction { .. })));
    let adaptive = PicardConfig { mu: 0.01, ..PicardConfig::default() };
    let out = solve_picard(&p, &h, &adaptive, 0).unwrap();
    assert!(out.mu > 0.01);
    let few = PicardConfig {
        mu: 200.0,
        max_iters: 3,
        ..PicardConfig::default()
    };
    assert!(matches!(solve_picard(&p, &h, &few, 0), Err(Error::NoConvergence { .. })));
}

#[test]
fn linearity_and_translation() {
    let g = sine_grid(30);
    let a = coupled();
    let fam = family(&a, g.clone(), 2.0, 0.01);
    let p = MildProblem::new(&a, &fam).unwrap();
    let h1 = coupled_history(&g, 100);
    let h2 = HistorySegment::from_fns(g.clone(), 2, 100, Exponent::TWO, |k, x| (x[0] * (k + 3) as f64).sin(), |tau, _, x| tau * x[0].sin())
        .unwrap();
    let (al, be) = (0.7, -1.3);
    let solver = MarchingSolver { quadrature: Quadrature::Trapezoid };
    let u1 = solver.solve(&p, &h1, 0).unwrap().trajectory;
    let u2 = solver.solve(&p, &h2, 0).unwrap().trajectory;
    let u12 = solver.solve(&p, &h1.combine(al, &h2, be).unwrap(), 0).unwrap().trajectory;
    for (t, u) in u12.solution() {
        let mut lin = u1.at_time(t).unwrap().scaled(al);
        lin.axpy(be, u2.at_time(t).unwrap());
        assert!(lp_norm(&u.sub(&lin), Exponent::TWO) < 1e-12);
    }
    assert_eq!(translation_check(&p, &u1, 0.0, &solver, Exponent::TWO).unwrap(), 0.0);
    assert!(translation_check(&p, &u1, 0.5, &solver, Exponent::TWO).unwrap() < 1e-12);
    assert!(translation_check(&p, &u1, 0.503, &solver, Exponent::TWO).is_err());
}

#[test]
fn registry_lookup() {
    let r = SolverRegistry::default();
    assert_eq!(r.names().collect::<Vec<_>>(), ["marching", "monolithic", "picard"]);
    let s = r.create("picard", &SolverSettings::default()).unwrap();
    assert_eq!(s.name(), "picard");
    assert!(matches!(
        r.create("euler", &SolverSettings::default()),
        Err(Error::Unknown { kind: "solver", .. })
    ));
}

#[test]
fn small_dense_solve() {
    let mut m = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
    let mut b = vec![3.0, 2.0, 4.0];
    solve_small(3, &mut m, &mut b).unwrap();
    for (x, e) in b.iter().zip([1.0, 1.0, 1.0]) {
        assert!((x - e).abs() < 1e-14);
    }
}

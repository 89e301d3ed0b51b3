//! Verification suites, selected by name on the command line.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use pdde_core::analysis::{
    oracle_method_of_steps, oracle_monolithic, smoothing_slope, verify_gronwall, verify_smoothing, BoundInputs,
    EstimateReport,
};
use pdde_core::coeff::{BcKind, Coupling};
use pdde_core::grid::{duality_pairing, lp_norm, Exponent, GridFunction, Trajectory};
use pdde_core::mild::{integral_residual, solve_marching, solve_picard, MildProblem, PicardConfig};
use pdde_core::propagator::{adjoint_propagate, cocycle_check, propagate, AdjointMode, GrowthFit, Propagator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Setup;
use crate::error::CliError;
use crate::run;

/// One line of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub theoretical: f64,
    pub measured: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `measured ≤ bound`.
    pub fn at_most(check: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckRow {
            check: check.into(),
            theoretical: bound,
            measured,
            margin: bound - measured,
            pass: measured <= bound,
        }
    }

    fn from_report(r: &EstimateReport) -> Self {
        CheckRow {
            check: r.bound_name.clone(),
            theoretical: r.theoretical,
            measured: r.measured,
            margin: r.margin,
            pass: r.passed(),
        }
    }
}

/// What a suite may read, plus the fitted constants it used.
pub struct Context<'a> {
    pub setup: &'a Setup,
    pub fits: Vec<GrowthFit>,
}

pub trait VerifySuite {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError>;
}

pub struct SuiteRegistry {
    suites: BTreeMap<&'static str, Box<dyn VerifySuite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        let mut r = SuiteRegistry { suites: BTreeMap::new() };
        r.register(Box::new(Cocycle));
        r.register(Box::new(Duality));
        r.register(Box::new(Picard));
        r.register(Box::new(Oracles));
        r.register(Box::new(Gronwall));
        r.register(Box::new(Smoothing));
        r
    }
}

impl SuiteRegistry {
    pub fn register(&mut self, suite: Box<dyn VerifySuite>) {
        self.suites.insert(suite.name(), suite);
    }

    pub fn get(&self, name: &str) -> Option<&dyn VerifySuite> {
        self.suites.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.keys().copied().collect()
    }
}

fn rng(ctx: &Context) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.setup.config.verify.seed)
}

fn random_field(rng: &mut ChaCha8Rng, fam: &dyn Propagator) -> GridFunction {
    GridFunction::from_fn(fam.grid().clone(), fam.n(), |_, _| rng.gen_range(-1.0..1.0))
}

fn random_steps(rng: &mut ChaCha8Rng, steps: usize) -> (usize, usize) {
    let a = rng.gen_range(0..steps);
    (a, rng.gen_range(a + 1..=steps))
}

fn solve(ctx: &mut Context) -> Result<Trajectory, CliError> {
    let setup = ctx.setup;
    let fam = setup.family()?;
    let fit = run::fit(setup, &fam, Exponent::TWO, Exponent::TWO)?;
    let chosen = run::solver(setup, &fit)?;
    ctx.fits.push(fit);
    let problem = MildProblem::new(&setup.point, &fam)?;
    Ok(chosen.solver.solve(&problem, &setup.history, 0)?.trajectory)
}

fn sup_gap(a: &Trajectory, b: &Trajectory) -> Result<f64, CliError> {
    let mut worst = 0.0_f64;
    for (t, u) in a.solution() {
        worst = worst.max(lp_norm(&u.sub(b.at_time(t)?), Exponent::TWO));
    }
    Ok(worst)
}

/// `U(t₂, t₁) U(t₁, s) = U(t₂, s)` on random triples.
struct Cocycle;

impl VerifySuite for Cocycle {
    fn name(&self) -> &'static str {
        "cocycle"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let fam = ctx.setup.family()?;
        let time = ctx.setup.time;
        let mut rng = rng(ctx);
        (0..ctx.setup.config.verify.trials)
            .map(|i| {
                let mut js = [0; 3].map(|_| rng.gen_range(0..=time.steps()));
                js.sort_unstable();
                let u = random_field(&mut rng, &fam);
                let [s, t1, t2] = js.map(|j| time.time(j));
                let res = cocycle_check(&fam, s, t1, t2, &u, Exponent::TWO)?;
                Ok(CheckRow::at_most(format!("cocycle_{i}"), res / lp_norm(&u, Exponent::TWO), 1e-12))
            })
            .collect()
    }
}

/// `⟨U(t, s)u, v⟩ = ⟨u, U*(s, t)v⟩` exactly in transpose mode, and up to the
/// time-discretization error in rediscretize mode for symmetric problems.
struct Duality;

fn duality_residual(fam: &dyn Propagator, rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
    let time = fam.time();
    let (a, b) = random_steps(rng, time.steps());
    let (s, t) = (time.time(a), time.time(b));
    let u = random_field(rng, fam);
    let v = random_field(rng, fam);
    let lhs = duality_pairing(&propagate(fam, s, t, &u)?, &v)?;
    let rhs = duality_pairing(&u, &adjoint_propagate(fam, s, t, &v)?)?;
    Ok((lhs - rhs).abs() / (lp_norm(&u, Exponent::TWO) * lp_norm(&v, Exponent::TWO)))
}

impl VerifySuite for Duality {
    fn name(&self) -> &'static str {
        "duality"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let mut rng = rng(ctx);
        let trials = ctx.setup.config.verify.trials;
        let fam = ctx.setup.family_with(AdjointMode::Transpose)?;
        let mut rows = Vec::new();
        for i in 0..trials {
            rows.push(CheckRow::at_most(format!("duality_transpose_{i}"), duality_residual(&fam, &mut rng)?, 1e-10));
        }
        if ctx.setup.point.components.iter().all(|c| c.is_self_adjoint()) {
            let fam = ctx.setup.family_with(AdjointMode::Rediscretize)?;
            let mut worst = 0.0_f64;
            for _ in 0..trials {
                worst = worst.max(duality_residual(&fam, &mut rng)?);
            }
            rows.push(CheckRow::at_most("duality_rediscretize", worst, 1e-3));
        }
        Ok(rows)
    }
}

/// Contraction ratios, iteration budget, agreement with marching and the
/// integral-equation residual.
struct Picard;

impl VerifySuite for Picard {
    fn name(&self) -> &'static str {
        "picard"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let setup = ctx.setup;
        let fam = setup.family()?;
        let fit = run::fit(setup, &fam, Exponent::TWO, Exponent::TWO)?;
        let (n, k) = (setup.point.n(), setup.point.k_bound);
        let horizon = setup.time.t_end() - setup.time.t0();
        let spec = &setup.config.solver;
        let cfg = PicardConfig {
            mu: PicardConfig::auto_mu(n, k, fit.m, fit.gamma, horizon),
            tol: spec.picard.tol,
            max_iters: spec.picard.max_iters,
            quadrature: spec.quadrature,
            adaptive: false,
            norm: Exponent::TWO,
        };
        let bound = cfg.ratio_bound(n, k, fit.m, fit.gamma, horizon) + 0.05;
        ctx.fits.push(fit);
        let problem = MildProblem::new(&setup.point, &fam)?;
        let out = solve_picard(&problem, &setup.history, &cfg, 0)?;
        let marching = solve_marching(&problem, &setup.history, spec.quadrature, 0)?;
        let budget = (cfg.tol.ln() / 0.55_f64.ln()).ceil() + 2.0;
        let residual = integral_residual(&problem, &setup.history, &out.trajectory, spec.quadrature, Exponent::TWO)?;
        Ok(vec![
            CheckRow::at_most("picard_max_ratio", out.ratios.iter().copied().fold(0.0, f64::max), bound),
            CheckRow::at_most("picard_iterations", out.iterations as f64, budget),
            CheckRow::at_most("picard_vs_marching", sup_gap(&out.trajectory, &marching)?, 1e-8),
            CheckRow::at_most("picard_integral_residual", residual, 10.0 * cfg.tol),
        ])
    }
}

/// The configured solver against the monolithic stepper and, for a single
/// constant-coefficient heat equation on an interval with Dirichlet ends,
/// the first sine mode against the method of steps.
struct Oracles;

struct Mode {
    lambda: f64,
    c0: f64,
    c1: f64,
    phi: GridFunction,
}

fn single_mode(setup: &Setup) -> Option<Mode> {
    let a = &setup.point;
    if a.n() != 1 || a.dim() != 1 {
        return None;
    }
    let c = &a.components[0];
    if c.bc != BcKind::Dirichlet || !c.is_self_adjoint() {
        return None;
    }
    let diff = c.diffusion[0][0].as_constant()?;
    let c0 = a.coupling(Coupling::Instant)[0][0].as_constant()?;
    let c1 = a.coupling(Coupling::Delayed)[0][0].as_constant()?;
    let axis = setup.grid.axis(0);
    let len = axis.hi - axis.lo;
    let lo = axis.lo;
    let phi = GridFunction::from_fn(setup.grid.clone(), 1, |_, x| (PI * (x[0] - lo) / len).sin());
    Some(Mode {
        lambda: diff * (PI / len).powi(2),
        c0,
        c1,
        phi,
    })
}

fn coefficient(u: &GridFunction, phi: &GridFunction) -> Result<f64, CliError> {
    Ok(duality_pairing(u, phi)? / duality_pairing(phi, phi)?)
}

impl VerifySuite for Oracles {
    fn name(&self) -> &'static str {
        "oracles"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let u = solve(ctx)?;
        let setup = ctx.setup;
        let mono = oracle_monolithic(&setup.point, setup.grid.clone(), setup.time, &setup.history)?;
        let mut rows = vec![CheckRow::at_most("monolithic_gap", sup_gap(&u, &mono)?, 1e-2)];
        if let Some(mode) = single_mode(setup) {
            let dt = setup.time.dt();
            let head = coefficient(setup.history.head(), &mode.phi)?;
            let tail = setup
                .history
                .tail()
                .iter()
                .map(|f| coefficient(f, &mode.phi))
                .collect::<Result<Vec<_>, _>>()?;
            // piecewise-linear through the samples at τ_i = −1 + i·dt and the head at 0
            let history = |tau: f64| {
                let x = ((tau + 1.0) / dt).clamp(0.0, tail.len() as f64);
                let i = (x.floor() as usize).min(tail.len() - 1);
                let next = tail.get(i + 1).copied().unwrap_or(head);
                tail[i] + (x - i as f64) * (next - tail[i])
            };
            let y = oracle_method_of_steps(mode.lambda, mode.c0, mode.c1, &history, setup.time.t_end(), dt)?;
            let scale = y.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let mut worst = 0.0_f64;
            for (t, v) in u.solution() {
                let reference = y.at(t - setup.time.t0()).ok_or(pdde_core::Error::OffGrid { time: t })?;
                worst = worst.max((coefficient(v, &mode.phi)? - reference).abs());
            }
            rows.push(CheckRow::at_most("method_of_steps_gap", worst, 1e-3 * scale));
        }
        Ok(rows)
    }
}

fn inputs(setup: &Setup, fit: &GrowthFit, p: Exponent, q: Exponent) -> BoundInputs {
    BoundInputs {
        m: fit.m,
        gamma: fit.gamma,
        k: setup.point.k_bound,
        n: setup.point.n(),
        big_n: setup.grid.dim(),
        p,
        q,
        r: setup.history.r(),
        t: setup.time.t_end() - setup.time.t0(),
    }
}

/// The Gronwall bound in every configured norm.
struct Gronwall;

impl VerifySuite for Gronwall {
    fn name(&self) -> &'static str {
        "gronwall"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let u = solve(ctx)?;
        let setup = ctx.setup;
        let fam = setup.family()?;
        let mut rows = Vec::new();
        for &p in &setup.norms {
            let fit = run::fit(setup, &fam, p, p)?;
            let report = verify_gronwall(&u, &setup.history, &inputs(setup, &fit, p, p))?;
            let mut row = CheckRow::from_report(&report);
            row.check = format!("gronwall_p{p}");
            rows.push(row);
            ctx.fits.push(fit);
        }
        Ok(rows)
    }
}

/// The `L_p → L_q` estimate along the solution and the `L_1 → L_∞` decay
/// slope of the uncoupled propagator for a single-cell datum.
struct Smoothing;

impl VerifySuite for Smoothing {
    fn name(&self) -> &'static str {
        "smoothing"
    }

    fn run(&self, ctx: &mut Context) -> Result<Vec<CheckRow>, CliError> {
        let v = &ctx.setup.config.verify;
        let (p, q) = (v.p.resolve()?, v.q.resolve()?);
        let [from, to] = v.slope_steps;
        if to > ctx.setup.time.steps() || from == 0 || from >= to {
            return Err(CliError::Config(format!(
                "verify.slope_steps [{from}, {to}] must satisfy 0 < from < to <= {}",
                ctx.setup.time.steps()
            )));
        }
        let u = solve(ctx)?;
        let setup = ctx.setup;
        let fam = setup.family()?;
        let fit = run::fit(setup, &fam, p, q)?;
        let report = verify_smoothing(&u, &inputs(setup, &fit, p, q))?;
        ctx.fits.push(fit);
        let mut rows = vec![CheckRow::from_report(&report)];
        let bump = GridFunction::indicator(setup.grid.clone(), setup.point.n(), 0, setup.grid.center_node());
        let slope = smoothing_slope(&fam, &bump, from, to)?;
        rows.push(CheckRow::at_most("smoothing_slope_relative_error", slope.relative_error, 0.1));
        Ok(rows)
    }
}

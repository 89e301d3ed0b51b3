use pdde_core::grid::Exponent;
use pdde_core::mild::{MildSolver, PicardConfig, SolverRegistry, SolverSettings};
use pdde_core::propagator::{estimate_m_gamma, GrowthFit, Propagator};

use crate::config::{MuSpec, Setup};
use crate::error::CliError;
use crate::output::Constants;

pub fn fit(setup: &Setup, fam: &dyn Propagator, p: Exponent, q: Exponent) -> Result<GrowthFit, CliError> {
    let e = &setup.config.estimate;
    Ok(estimate_m_gamma(fam, p, q, e.samples.max(2), e.seed)?)
}

/// The configured solver, with `μ` resolved from the fitted constants when
/// the config says `"auto"`.
pub struct ChosenSolver {
    pub solver: Box<dyn MildSolver>,
    pub mu: Option<f64>,
    pub mu_source: Option<String>,
}

pub fn solver(setup: &Setup, fit: &GrowthFit) -> Result<ChosenSolver, CliError> {
    let spec = &setup.config.solver;
    let (mu, source) = match spec.picard.mu {
        MuSpec::Value(v) => (v, "config"),
        MuSpec::Auto(_) => (
            PicardConfig::auto_mu(setup.point.n(), setup.point.k_bound, fit.m, fit.gamma, setup.time.t_end() - setup.time.t0()),
            "auto",
        ),
    };
    let settings = SolverSettings {
        quadrature: spec.quadrature,
        picard: PicardConfig {
            mu,
            tol: spec.picard.tol,
            max_iters: spec.picard.max_iters,
            quadrature: spec.quadrature,
            adaptive: spec.picard.adaptive,
            norm: Exponent::TWO,
        },
    };
    let solver = SolverRegistry::default()
        .create(&spec.name, &settings)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let picard = solver.name() == "picard";
    Ok(ChosenSolver {
        solver,
        mu: picard.then_some(mu),
        mu_source: picard.then(|| source.to_string()),
    })
}

pub fn constants(setup: &Setup, fit: Option<&GrowthFit>, chosen: Option<&ChosenSolver>) -> Constants {
    Constants {
        k_declared: setup.point.k_bound,
        m_fitted: fit.map(|f| f.m),
        gamma_fitted: fit.map(|f| f.gamma),
        fit_method: fit.map(|f| f.method.clone()),
        mu: chosen.and_then(|c| c.mu),
        mu_source: chosen.and_then(|c| c.mu_source.clone()),
    }
}

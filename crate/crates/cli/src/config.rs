//! Run configuration: one JSON document, coefficients as expression strings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pdde_core::analysis::{regularizing_window, StudySpec, TrendRule};
use pdde_core::coeff::{
    sup_bound_k, weakstar_oscillate, BcKind, CoeffExpr, ComponentCoeffs, OscillationMode, ParameterPoint,
    PerturbationTargets,
};
use pdde_core::grid::{Axis, Exponent, GridFunction, HistorySegment, SpatialGrid, TimeGrid};
use pdde_core::mild::{PicardConfig, Quadrature, SolverRegistry};
use pdde_core::propagator::{AdjointMode, EvolutionFamily, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// An exponent written as a number or `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpSpec {
    Num(f64),
    Word(String),
}

impl ExpSpec {
    pub fn resolve(&self) -> Result<Exponent, CliError> {
        match self {
            ExpSpec::Num(p) => Exponent::new(*p).map_err(config),
            ExpSpec::Word(w) => w.parse().map_err(|_| CliError::Config(format!("invalid exponent '{w}'"))),
        }
    }
}

fn two() -> ExpSpec {
    ExpSpec::Num(2.0)
}

fn inf() -> ExpSpec {
    ExpSpec::Word("inf".into())
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub time: TimeSpec,
    pub system: SystemSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// `q` values for the columns of `norms.csv`.
    #[serde(default = "default_norms")]
    pub norms: Vec<ExpSpec>,
    /// Also write every nodal value to `snapshots.csv`.
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default)]
    pub estimate: EstimateSpec,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub verify: VerifySpec,
    /// Used when `--out` is not given.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_norms() -> Vec<ExpSpec> {
    vec![two()]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// `[lo, hi]` per axis.
    pub extents: Vec<[f64; 2]>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub bc: BcKind,
    /// `a_ij`; identity when absent.
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub drift_div: Option<Vec<String>>,
    #[serde(default)]
    pub drift: Option<Vec<String>>,
    #[serde(default)]
    pub robin: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub c0: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub c1: Option<Vec<Vec<String>>>,
    #[serde(default = "one")]
    pub alpha0: f64,
    /// Declared sup bound of `c₀`, `c₁`; the sampled sup (plus any study
    /// amplitude) when absent.
    #[serde(default)]
    pub k_bound: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// `u₀⁽¹⁾` per component, in `x1`, `x2`.
    pub head: Vec<String>,
    /// `u₀⁽²⁾(τ, x)` per component with `τ ∈ [−1, 0)` written as `t`;
    /// defaults to the head (constant history).
    #[serde(default)]
    pub tail: Option<Vec<String>>,
    #[serde(default = "inf")]
    pub r: ExpSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Value(f64),
    /// `"auto"`: `4 n² K M e^{γT}` with fitted `(M, γ)`.
    Auto(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSpec {
    pub mu: MuSpec,
    pub tol: f64,
    pub max_iters: usize,
    pub adaptive: bool,
}

impl Default for PicardSpec {
    fn default() -> Self {
        let d = PicardConfig::default();
        PicardSpec {
            mu: MuSpec::Auto("auto".into()),
            tol: d.tol,
            max_iters: d.max_iters,
            adaptive: d.adaptive,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub name: String,
    pub scheme: Scheme,
    pub quadrature: Quadrature,
    pub adjoint: AdjointMode,
    pub picard: PicardSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            name: "picard".into(),
            scheme: Scheme::CrankNicolson,
            quadrature: Quadrature::Trapezoid,
            adjoint: AdjointMode::Transpose,
            picard: PicardSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSpec {
    pub samples: usize,
    pub seed: u64,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        EstimateSpec { samples: 6, seed: 1 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Range([f64; 2]),
    /// `"regularizing"`: `[Θ + 1 + dt, T]`.
    Named(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub ms: Vec<u32>,
    pub amp: f64,
    pub mode: OscillationMode,
    #[serde(default)]
    pub targets: PerturbationTargets,
    #[serde(default = "two")]
    pub q: ExpSpec,
    #[serde(default = "regularizing")]
    pub window: WindowSpec,
    #[serde(default = "inf")]
    pub r0: ExpSpec,
    #[serde(default = "two")]
    pub p: ExpSpec,
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(default)]
    pub rule: Option<TrendRule>,
}

fn regularizing() -> WindowSpec {
    WindowSpec::Named("regularizing".into())
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub p: ExpSpec,
    pub q: ExpSpec,
    pub seed: u64,
    pub trials: usize,
    /// Step window of the smoothing slope fit.
    pub slope_steps: [usize; 2],
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            p: two(),
            q: two(),
            seed: 1,
            trials: 20,
            slope_steps: [10, 100],
        }
    }
}

/// Everything a command needs, built and validated from a [`RunConfig`].
pub struct Setup {
    pub config: RunConfig,
    pub raw: Vec<u8>,
    pub point: ParameterPoint,
    pub grid: Arc<SpatialGrid>,
    pub time: TimeGrid,
    pub history: HistorySegment,
    pub norms: Vec<Exponent>,
    pub study: Option<StudySpec>,
}

impl Setup {
    pub fn family(&self) -> Result<EvolutionFamily, CliError> {
        self.family_with(self.config.solver.adjoint)
    }

    pub fn family_with(&self, mode: AdjointMode) -> Result<EvolutionFamily, CliError> {
        EvolutionFamily::new(&self.point, self.grid.clone(), self.time, self.config.solver.scheme, mode)
            .map_err(CliError::Solver)
    }
}

fn parse(src: &str, what: &str) -> Result<CoeffExpr, CliError> {
    CoeffExpr::parse(src).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn parse_matrix(m: &[Vec<String>], rows: usize, what: &str) -> Result<Vec<Vec<CoeffExpr>>, CliError> {
    if m.len() != rows || m.iter().any(|r| r.len() != rows) {
        return Err(CliError::Config(format!("{what} must be {rows} x {rows}")));
    }
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, s)| parse(s, &format!("{what}[{}][{}]", i + 1, j + 1)))
                .collect()
        })
        .collect()
}

fn parse_vector(v: &[String], len: usize, what: &str) -> Result<Vec<CoeffExpr>, CliError> {
    if v.len() != len {
        return Err(CliError::Config(format!("{what} must have {len} entries")));
    }
    v.iter()
        .enumerate()
        .map(|(i, s)| parse(s, &format!("{what}[{}]", i + 1)))
        .collect()
}

fn da1(detail: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("assumption DA1 violated: {detail}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Setup, CliError> {
        let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_slice(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.build(raw)
    }

    /// Checks every precondition (domain, time grid, DA1–DA5, study window
    /// and amplitude) before anything is computed.
    pub fn build(self, raw: Vec<u8>) -> Result<Setup, CliError> {
        let d = &self.domain;
        let dim = d.extents.len();
        if !(1..=2).contains(&dim) || d.cells.len() != dim {
            return Err(da1(format!(
                "need 1 or 2 axes with one cell count each, got {dim} extents and {} counts",
                d.cells.len()
            )));
        }
        let axes = d
            .extents
            .iter()
            .zip(&d.cells)
            .map(|(&[lo, hi], &cells)| Axis { lo, hi, cells })
            .collect();
        let grid = Arc::new(SpatialGrid::new(axes).map_err(da1)?);
        let time = TimeGrid::new(0.0, self.time.t_end, self.time.dt).map_err(config)?;

        let s = &self.system;
        if s.components.len() != s.n || s.n == 0 {
            return Err(CliError::Config(format!(
                "system.n = {} but {} components are given",
                s.n,
                s.components.len()
            )));
        }
        let components = s
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let kk = k + 1;
                let mut out = ComponentCoeffs::laplacian(dim, c.bc);
                if let Some(a) = &c.diffusion {
                    out.diffusion = parse_matrix(a, dim, &format!("components[{kk}].diffusion"))?;
                }
                if let Some(v) = &c.drift_div {
                    out.drift_div = parse_vector(v, dim, &format!("components[{kk}].drift_div"))?;
                }
                if let Some(v) = &c.drift {
                    out.drift = parse_vector(v, dim, &format!("components[{kk}].drift"))?;
                }
                if let Some(r) = &c.robin {
                    out.robin = parse(r, &format!("components[{kk}].robin"))?;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let zero = vec![vec![CoeffExpr::zero(); s.n]; s.n];
        let c0 = s.c0.as_ref().map(|m| parse_matrix(m, s.n, "c0")).transpose()?.unwrap_or_else(|| zero.clone());
        let c1 = s.c1.as_ref().map(|m| parse_matrix(m, s.n, "c1")).transpose()?.unwrap_or(zero);
        let mut point = ParameterPoint::new(components, c0, c1, s.alpha0, s.k_bound.unwrap_or(0.0)).map_err(config)?;
        if s.k_bound.is_none() {
            let amp = self.study.as_ref().map_or(0.0, |st| st.amp.abs());
            point.k_bound = sup_bound_k(std::slice::from_ref(&point), &grid, &time) + amp;
        }
        point.validate(&grid, &time).map_err(config)?;

        let i = &self.initial;
        let head = parse_vector(&i.head, s.n, "initial.head")?;
        let tail = match &i.tail {
            Some(t) => parse_vector(t, s.n, "initial.tail")?,
            None => head.clone(),
        };
        let r = i.r.resolve()?;
        let history = HistorySegment::from_fns(
            grid.clone(),
            s.n,
            time.steps_per_delay(),
            r,
            |k, x| head[k].eval(0.0, x),
            |tau, k, x| tail[k].eval(tau, x),
        )
        .map_err(config)?;
        let finite = |f: &GridFunction| f.is_finite();
        if !finite(history.head()) || !history.tail().iter().all(finite) {
            return Err(CliError::Config("initial datum is not finite on the grid".into()));
        }

        let norms = self.norms.iter().map(ExpSpec::resolve).collect::<Result<Vec<_>, _>>()?;
        if norms.is_empty() {
            return Err(CliError::Config("norms must list at least one exponent".into()));
        }
        if SolverRegistry::default().names().all(|n| n != self.solver.name) {
            return Err(CliError::Config(format!("unknown solver '{}'", self.solver.name)));
        }
        let p = &self.solver.picard;
        if let MuSpec::Auto(w) = &p.mu {
            if w != "auto" {
                return Err(CliError::Config(format!("solver.picard.mu must be a number or \"auto\", got '{w}'")));
            }
        }
        if !(p.tol > 0.0) || p.max_iters == 0 {
            return Err(CliError::Config("solver.picard needs tol > 0 and max_iters > 0".into()));
        }

        let study = self.study.as_ref().map(|st| study_spec(st, &point, &grid, &time)).transpose()?;
        Ok(Setup {
            config: self,
            raw,
            point,
            grid,
            time,
            history,
            norms,
            study,
        })
    }
}

fn study_spec(st: &StudyConfig, point: &ParameterPoint, grid: &SpatialGrid, time: &TimeGrid) -> Result<StudySpec, CliError> {
    let window = match &st.window {
        WindowSpec::Range([a, b]) => (*a, *b),
        WindowSpec::Named(w) if w == "regularizing" => {
            regularizing_window(grid.dim(), st.r0.resolve()?, time).map_err(config)?
        }
        WindowSpec::Named(w) => return Err(CliError::Config(format!("unknown study window '{w}'"))),
    };
    if st.ms.is_empty() || st.ms.windows(2).any(|w| w[0] >= w[1]) || st.ms[0] == 0 {
        return Err(CliError::Config("study.ms must be positive and strictly increasing".into()));
    }
    for &m in &st.ms {
        weakstar_oscillate(point, m, st.amp, st.mode, &st.targets, grid, time).map_err(config)?;
    }
    Ok(StudySpec {
        ms: st.ms.clone(),
        amp: st.amp,
        mode: st.mode,
        targets: st.targets.clone(),
        q: st.q.resolve()?,
        window,
        p: st.p.resolve()?,
        r: st.r0.resolve()?,
        strict: st.strict,
        rule: st.rule.unwrap_or_default(),
    })
}

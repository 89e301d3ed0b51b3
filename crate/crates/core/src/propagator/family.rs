use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::banded::{BandLu, BandMatrix};
use super::form::assemble_form;
use crate::coeff::{ComponentCoeffs, ParameterPoint};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Exponent, GridFunction, SpatialGrid, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjointMode {
    /// Transposes of the forward one-step operators, in reverse order.
    Transpose,
    /// The θ-scheme applied to the backward equation with coefficients `a₀*`.
    Rediscretize,
}

/// One-step solution operators `P_j` of the uncoupled system on a time grid.
///
/// Vectors are component-major nodal values of all `n` components; step `j`
/// maps the state at `t_j` to `t_{j+1}`.
pub trait Propagator: Send + Sync {
    fn grid(&self) -> &Arc<SpatialGrid>;
    fn n(&self) -> usize;
    fn time(&self) -> &TimeGrid;
    /// `u ← P_j u`.
    fn step(&self, j: usize, u: &mut [f64]) -> Result<()>;
    /// `u ← (I + θ·dt·A_j)⁻¹ u`, the implicit half of step `j`.
    fn implicit_solve(&self, j: usize, u: &mut [f64]) -> Result<()>;
    /// `v ← P_j* v`, one step of the adjoint family backward over `[t_j, t_{j+1}]`.
    fn adjoint_step(&self, j: usize, v: &mut [f64]) -> Result<()>;
}

/// `U(t, s) = Id` for all `s ≤ t`; a stub for testing Duhamel quadrature.
#[derive(Clone, Debug)]
pub struct IdentityPropagator {
    grid: Arc<SpatialGrid>,
    n: usize,
    time: TimeGrid,
}

impl IdentityPropagator {
    pub fn new(grid: Arc<SpatialGrid>, n: usize, time: TimeGrid) -> Self {
        IdentityPropagator { grid, n, time }
    }
}

impl Propagator for IdentityPropagator {
    fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }
    fn n(&self) -> usize {
        self.n
    }
    fn time(&self) -> &TimeGrid {
        &self.time
    }
    fn step(&self, _: usize, _: &mut [f64]) -> Result<()> {
        Ok(())
    }
    fn implicit_solve(&self, _: usize, _: &mut [f64]) -> Result<()> {
        Ok(())
    }
    fn adjoint_step(&self, _: usize, _: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug)]
struct StepOp {
    explicit: Option<BandMatrix>,
    lu: BandLu,
}

/// Cached factorizations above this size are rebuilt on every use instead.
const CACHE_BYTES: usize = 1 << 30;
/// Below this many nodes per component the components are stepped serially.
const PAR_NODES: usize = 2048;

#[derive(Debug)]
struct StepCache {
    comps: Vec<ComponentCoeffs>,
    grid: Arc<SpatialGrid>,
    time: TimeGrid,
    theta: f64,
    backward: bool,
    time_dependent: bool,
    slots: Vec<OnceLock<Arc<Vec<StepOp>>>>,
}

impl StepCache {
    fn new(comps: Vec<ComponentCoeffs>, grid: Arc<SpatialGrid>, time: TimeGrid, theta: f64, backward: bool) -> Self {
        let time_dependent = comps.iter().any(ComponentCoeffs::depends_on_time);
        let w = super::form::stencil_width(&grid);
        let per_step = comps.len() * grid.num_nodes() * (2 * w + 1) * 16;
        let slots = if !time_dependent {
            1
        } else if per_step.saturating_mul(time.steps()) <= CACHE_BYTES {
            time.steps()
        } else {
            0
        };
        StepCache {
            comps,
            grid,
            time,
            theta,
            backward,
            time_dependent,
            slots: (0..slots).map(|_| OnceLock::new()).collect(),
        }
    }

    fn eval_time(&self, j: usize) -> f64 {
        let dt = self.time.dt();
        if self.backward {
            self.time.time(j + 1) - self.theta * dt
        } else {
            self.time.time(j) + self.theta * dt
        }
    }

    fn build(&self, j: usize) -> Result<Vec<StepOp>> {
        let t = self.eval_time(j);
        let dt = self.time.dt();
        self.comps
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let a = assemble_form(c, t, &self.grid)?.into_matrix();
                let lu = a.shifted(1.0, self.theta * dt).factor().map_err(|e| {
                    Error::Solve(format!("component {}, step {j} (t = {t}): {e}", k + 1))
                })?;
                let explicit = (self.theta < 1.0).then(|| a.shifted(1.0, -(1.0 - self.theta) * dt));
                Ok(StepOp { explicit, lu })
            })
            .collect()
    }

    fn get(&self, j: usize) -> Result<Arc<Vec<StepOp>>> {
        if j >= self.time.steps() {
            return Err(Error::OffGrid { time: self.time.time(j) });
        }
        let slot = if self.time_dependent { j } else { 0 };
        match self.slots.get(slot) {
            None => Ok(Arc::new(self.build(j)?)),
            Some(cell) => {
                if let Some(ops) = cell.get() {
                    return Ok(ops.clone());
                }
                let ops = Arc::new(self.build(j)?);
                Ok(cell.get_or_init(|| ops).clone())
            }
        }
    }
}

fn for_each_component(u: &mut [f64], m: usize, ops: &[StepOp], f: impl Fn(&StepOp, &mut [f64]) + Sync) {
    if ops.len() > 1 && m >= PAR_NODES {
        u.par_chunks_mut(m).zip(ops.par_iter()).for_each(|(c, op)| f(op, c));
    } else {
        u.chunks_mut(m).zip(ops).for_each(|(c, op)| f(op, c));
    }
}

/// Discrete evolution family `U⁰_{a₀}(t, s)` of the uncoupled equations by the
/// θ-scheme `P_j = (I + θ·dt·A_j)⁻¹ (I − (1−θ)·dt·A_j)` with `A_j = A(t_j + θ·dt)`.
#[derive(Debug)]
pub struct EvolutionFamily {
    n: usize,
    scheme: Scheme,
    adjoint_mode: AdjointMode,
    forward: StepCache,
    backward: Option<StepCache>,
}

impl EvolutionFamily {
    /// Uses only the higher-order part `a₀` of `a`.
    pub fn new(
        a: &ParameterPoint,
        grid: Arc<SpatialGrid>,
        time: TimeGrid,
        scheme: Scheme,
        adjoint_mode: AdjointMode,
    ) -> Result<Self> {
        if grid.dim() != a.dim() {
            return Err(Error::GridMismatch(format!(
                "coefficients are {}-dimensional, grid is {}-dimensional",
                a.dim(),
                grid.dim()
            )));
        }
        let theta = scheme.theta();
        let forward = StepCache::new(a.components.clone(), grid.clone(), time, theta, false);
        let backward = (adjoint_mode == AdjointMode::Rediscretize).then(|| {
            let adj = a.components.iter().map(ComponentCoeffs::adjoint).collect();
            StepCache::new(adj, grid, time, theta, true)
        });
        let fam = EvolutionFamily {
            n: a.n(),
            scheme,
            adjoint_mode,
            forward,
            backward,
        };
        // fail early when the first implicit operator is singular
        fam.forward.get(0)?;
        Ok(fam)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn adjoint_mode(&self) -> AdjointMode {
        self.adjoint_mode
    }

    pub fn is_time_dependent(&self) -> bool {
        self.forward.time_dependent
    }
}

impl Propagator for EvolutionFamily {
    fn grid(&self) -> &Arc<SpatialGrid> {
        &self.forward.grid
    }

    fn n(&self) -> usize {
        self.n
    }

    fn time(&self) -> &TimeGrid {
        &self.forward.time
    }

    fn step(&self, j: usize, u: &mut [f64]) -> Result<()> {
        let ops = self.forward.get(j)?;
        let m = self.forward.grid.num_nodes();
        for_each_component(u, m, &ops, |op, c| {
            if let Some(e) = &op.explicit {
                let x = c.to_vec();
                e.matvec(&x, c);
            }
            op.lu.solve(c);
        });
        Ok(())
    }

    fn implicit_solve(&self, j: usize, u: &mut [f64]) -> Result<()> {
        let ops = self.forward.get(j)?;
        let m = self.forward.grid.num_nodes();
        for_each_component(u, m, &ops, |op, c| op.lu.solve(c));
        Ok(())
    }

    fn adjoint_step(&self, j: usize, v: &mut [f64]) -> Result<()> {
        let m = self.forward.grid.num_nodes();
        match &self.backward {
            None => {
                let ops = self.forward.get(j)?;
                for_each_component(v, m, &ops, |op, c| {
                    op.lu.solve_transpose(c);
                    if let Some(e) = &op.explicit {
                        let x = c.to_vec();
                        e.matvec_transpose(&x, c);
                    }
                });
            }
            Some(back) => {
                let ops = back.get(j)?;
                for_each_component(v, m, &ops, |op, c| {
                    if let Some(e) = &op.explicit {
                        let x = c.to_vec();
                        e.matvec(&x, c);
                    }
                    op.lu.solve(c);
                });
            }
        }
        Ok(())
    }
}

fn step_range(fam: &dyn Propagator, s: f64, t: f64) -> Result<(usize, usize)> {
    let time = fam.time();
    let (js, jt) = (time.index_of(s)?, time.index_of(t)?);
    if js > jt {
        return Err(Error::Precondition(format!("need s <= t, got s = {s}, t = {t}")));
    }
    Ok((js, jt))
}

fn check_shape(fam: &dyn Propagator, u: &GridFunction) -> Result<()> {
    if u.n() != fam.n() || **u.grid() != **fam.grid() {
        return Err(Error::GridMismatch(
            "function does not live on the propagator's grid".into(),
        ));
    }
    Ok(())
}

/// `U(t, s) u`.
pub fn propagate(fam: &dyn Propagator, s: f64, t: f64, u: &GridFunction) -> Result<GridFunction> {
    check_shape(fam, u)?;
    let (js, jt) = step_range(fam, s, t)?;
    let mut out = u.clone();
    for j in js..jt {
        fam.step(j, out.values_mut())?;
    }
    Ok(out)
}

/// `U*(s, t) v`, marching the adjoint family backward from `t` to `s`.
pub fn adjoint_propagate(fam: &dyn Propagator, s: f64, t: f64, v: &GridFunction) -> Result<GridFunction> {
    check_shape(fam, v)?;
    let (js, jt) = step_range(fam, s, t)?;
    let mut out = v.clone();
    for j in (js..jt).rev() {
        fam.adjoint_step(j, out.values_mut())?;
    }
    Ok(out)
}

/// `‖U(t₂, t₁) U(t₁, s) u − U(t₂, s) u‖_{L_p}`.
pub fn cocycle_check(
    fam: &dyn Propagator,
    s: f64,
    t1: f64,
    t2: f64,
    u: &GridFunction,
    p: Exponent,
) -> Result<f64> {
    step_range(fam, s, t1)?;
    step_range(fam, t1, t2)?;
    let mid = propagate(fam, s, t1, u)?;
    let composed = propagate(fam, t1, t2, &mid)?;
    let direct = propagate(fam, s, t2, u)?;
    Ok(lp_norm(&composed.sub(&direct), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{BcKind, CoeffExpr};
    use crate::grid::duality_pairing;
    use std::f64::consts::PI;

    fn heat(cells: usize, t_end: f64, dt: f64, scheme: Scheme) -> EvolutionFamily {
        let g = Arc::new(SpatialGrid::interval(0.0, PI, cells).unwrap());
        let a = ParameterPoint::heat(1, 1, BcKind::Dirichlet);
        EvolutionFamily::new(&a, g, TimeGrid::new(0.0, t_end, dt).unwrap(), scheme, AdjointMode::Transpose).unwrap()
    }

    #[test]
    fn eigenmode_decay() {
        let fam = heat(200, 1.0, 1e-3, Scheme::CrankNicolson);
        let u0 = GridFunction::from_fn(fam.grid().clone(), 1, |_, x| x[0].sin());
        let u = propagate(&fam, 0.0, 1.0, &u0).unwrap();
        let exact = u0.scaled((-1.0_f64).exp());
        assert!(lp_norm(&u.sub(&exact), Exponent::TWO) < 1e-3);
        assert_eq!(propagate(&fam, 0.5, 0.5, &u0).unwrap(), u0);
    }

    #[test]
    fn off_grid_and_reversed_times_rejected() {
        let fam = heat(20, 1.0, 0.01, Scheme::CrankNicolson);
        let u0 = GridFunction::zeros(fam.grid().clone(), 1);
        assert!(matches!(propagate(&fam, 0.0, 0.0051, &u0), Err(Error::OffGrid { .. })));
        assert!(propagate(&fam, 0.5, 0.2, &u0).is_err());
    }

    #[test]
    fn time_dependent_duality_is_exact() {
        let g = Arc::new(SpatialGrid::interval(0.0, 1.0, 30).unwrap());
        let mut a = ParameterPoint::heat(2, 1, BcKind::Robin);
        a.components[0].diffusion[0][0] = CoeffExpr::parse("1 + 0.5*sin(3*t)*x1").unwrap();
        a.components[0].drift[0] = CoeffExpr::parse("cos(t)").unwrap();
        a.components[0].robin = CoeffExpr::parse("1 + t").unwrap();
        a.components[1].bc = BcKind::Dirichlet;
        a.components[1].drift_div[0] = CoeffExpr::parse("x1 - 0.5").unwrap();
        let time = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let fam = EvolutionFamily::new(&a, g.clone(), time, Scheme::CrankNicolson, AdjointMode::Transpose).unwrap();
        let u = GridFunction::from_fn(g.clone(), 2, |k, x| (x[0] * (k + 2) as f64).sin());
        let v = GridFunction::from_fn(g, 2, |k, x| (x[0] - 0.3 * k as f64).cos());
        let lhs = duality_pairing(&propagate(&fam, 0.2, 0.9, &u).unwrap(), &v).unwrap();
        let rhs = duality_pairing(&u, &adjoint_propagate(&fam, 0.2, 0.9, &v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn implicit_euler_preserves_positivity() {
        let fam = heat(40, 0.5, 0.01, Scheme::ImplicitEuler);
        let u0 = GridFunction::indicator(fam.grid().clone(), 1, 0, 3);
        let u = propagate(&fam, 0.0, 0.5, &u0).unwrap();
        assert!(u.values().iter().all(|&v| v >= 0.0));
    }
}

//! The parameter space: coefficient fields, their declared bounds, matrix
//! norms, the multiplication operators 𝒞⁰/𝒞¹ and weak-* test sequences.

pub mod expr;
mod table;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Exponent, GridFunction, SpatialGrid, TimeGrid};

pub use expr::{CoeffExpr, ExprError, Var};
pub use table::CouplingTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Robin,
}

/// Which zero-order matrix: `c₀` (instantaneous) or `c₁` (delayed).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coupling {
    Instant,
    Delayed,
}

impl Coupling {
    pub fn index(self) -> usize {
        match self {
            Coupling::Instant => 0,
            Coupling::Delayed => 1,
        }
    }
}

/// Second- and first-order coefficients and boundary data of one equation.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentCoeffs {
    pub bc: BcKind,
    /// `a_ij`, `N × N`, symmetric.
    pub diffusion: Vec<Vec<CoeffExpr>>,
    /// `a_i`, inside the divergence.
    pub drift_div: Vec<CoeffExpr>,
    /// `b_i`, outside the divergence.
    pub drift: Vec<CoeffExpr>,
    /// Robin coefficient `d₀`; zero for Dirichlet and Neumann.
    pub robin: CoeffExpr,
}

impl ComponentCoeffs {
    /// `a_ij = δ_ij`, no drift.
    pub fn laplacian(dim: usize, bc: BcKind) -> Self {
        let diffusion = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| CoeffExpr::constant(if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        ComponentCoeffs {
            bc,
            diffusion,
            drift_div: vec![CoeffExpr::zero(); dim],
            drift: vec![CoeffExpr::zero(); dim],
            robin: CoeffExpr::zero(),
        }
    }

    /// Coefficients of the backward (adjoint) problem: `(a_ji, -b_i, -a_i, d₀)`.
    pub fn adjoint(&self) -> Self {
        let dim = self.diffusion.len();
        ComponentCoeffs {
            bc: self.bc,
            diffusion: (0..dim)
                .map(|i| (0..dim).map(|j| self.diffusion[j][i].clone()).collect())
                .collect(),
            drift_div: self.drift.iter().map(CoeffExpr::negated).collect(),
            drift: self.drift_div.iter().map(CoeffExpr::negated).collect(),
            robin: self.robin.clone(),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        self.diffusion.iter().flatten().any(CoeffExpr::depends_on_time)
            || self.drift_div.iter().any(CoeffExpr::depends_on_time)
            || self.drift.iter().any(CoeffExpr::depends_on_time)
            || self.robin.depends_on_time()
    }

    /// True when the form is symmetric: no first-order terms.
    pub fn is_self_adjoint(&self) -> bool {
        self.drift_div.iter().all(CoeffExpr::is_zero) && self.drift.iter().all(CoeffExpr::is_zero)
    }
}

/// A point `a ∈ Y`: all coefficient fields of the delayed system plus the
/// declared bounds `α₀` (ellipticity) and `K` (sup of the zero-order fields).
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint {
    n: usize,
    dim: usize,
    pub components: Vec<ComponentCoeffs>,
    /// `c₀[k][l]`.
    pub c0: Vec<Vec<CoeffExpr>>,
    /// `c₁[k][l]`.
    pub c1: Vec<Vec<CoeffExpr>>,
    pub alpha0: f64,
    pub k_bound: f64,
}

fn zero_matrix(n: usize) -> Vec<Vec<CoeffExpr>> {
    vec![vec![CoeffExpr::zero(); n]; n]
}

impl ParameterPoint {
    pub fn new(
        components: Vec<ComponentCoeffs>,
        c0: Vec<Vec<CoeffExpr>>,
        c1: Vec<Vec<CoeffExpr>>,
        alpha0: f64,
        k_bound: f64,
    ) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::Precondition("at least one component required".into()));
        }
        let dim = components[0].diffusion.len();
        if dim == 0 || dim > 2 {
            return Err(Error::assumption("DA1", format!("spatial dimension {dim} not in {{1, 2}}")));
        }
        for (k, c) in components.iter().enumerate() {
            if c.diffusion.len() != dim
                || c.diffusion.iter().any(|row| row.len() != dim)
                || c.drift_div.len() != dim
                || c.drift.len() != dim
            {
                return Err(Error::Precondition(format!(
                    "component {} coefficients do not match dimension {dim}",
                    k + 1
                )));
            }
        }
        for (name, m) in [("c0", &c0), ("c1", &c1)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::Precondition(format!("{name} must be {n} x {n}")));
            }
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::assumption("DA4", format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(k_bound >= 0.0 && k_bound.is_finite()) {
            return Err(Error::assumption("DA3", format!("K must be finite and nonnegative, got {k_bound}")));
        }
        Ok(ParameterPoint {
            n,
            dim,
            components,
            c0,
            c1,
            alpha0,
            k_bound,
        })
    }

    /// `n` uncoupled heat equations `u_t = Δu` with bc `bc`.
    pub fn heat(n: usize, dim: usize, bc: BcKind) -> Self {
        ParameterPoint {
            n,
            dim,
            components: (0..n).map(|_| ComponentCoeffs::laplacian(dim, bc)).collect(),
            c0: zero_matrix(n),
            c1: zero_matrix(n),
            alpha0: 1.0,
            k_bound: 0.0,
        }
    }

    /// Replaces a coupling matrix with constants.
    pub fn with_constant_coupling(mut self, which: Coupling, m: &[&[f64]]) -> Self {
        let mat = m
            .iter()
            .map(|row| row.iter().map(|&v| CoeffExpr::constant(v)).collect())
            .collect();
        *self.coupling_mut(which) = mat;
        self
    }

    pub fn with_coupling(mut self, which: Coupling, m: Vec<Vec<CoeffExpr>>) -> Self {
        *self.coupling_mut(which) = m;
        self
    }

    pub fn with_k_bound(mut self, k: f64) -> Self {
        self.k_bound = k;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coupling(&self, which: Coupling) -> &Vec<Vec<CoeffExpr>> {
        match which {
            Coupling::Instant => &self.c0,
            Coupling::Delayed => &self.c1,
        }
    }

    pub fn coupling_mut(&mut self, which: Coupling) -> &mut Vec<Vec<CoeffExpr>> {
        match which {
            Coupling::Instant => &mut self.c0,
            Coupling::Delayed => &mut self.c1,
        }
    }

    /// Same higher-order part `a₀` as `other`.
    pub fn same_principal_part(&self, other: &ParameterPoint) -> bool {
        self.components == other.components
    }

    pub fn has_coupling(&self) -> bool {
        self.c0.iter().chain(&self.c1).flatten().any(|e| !e.is_zero())
    }

    /// Checks DA2..DA4 at the sampled space-time nodes.
    pub fn validate(&self, grid: &SpatialGrid, time: &TimeGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "coefficients are {}-dimensional, grid is {}-dimensional",
                self.dim,
                grid.dim()
            )));
        }
        let times = sample_times(time, grid.num_nodes());
        let nodes: Vec<[f64; 2]> = grid.nodes().collect();
        let faces = boundary_points(grid);

        let finite = |e: &CoeffExpr, what: String, pts: &[[f64; 2]]| -> Result<()> {
            for &t in &times {
                for &x in pts {
                    let v = e.eval(t, x);
                    if !v.is_finite() {
                        return Err(Error::assumption(
                            "DA2",
                            format!("{what} is not finite at t = {t}, x = {x:?}"),
                        ));
                    }
                }
            }
            Ok(())
        };

        for (k, c) in self.components.iter().enumerate() {
            let kk = k + 1;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    finite(&c.diffusion[i][j], format!("a^{kk}_{}{}", i + 1, j + 1), &nodes)?;
                }
                finite(&c.drift_div[i], format!("a^{kk}_{}", i + 1), &nodes)?;
                finite(&c.drift[i], format!("b^{kk}_{}", i + 1), &nodes)?;
            }
            match c.bc {
                BcKind::Robin => {
                    finite(&c.robin, format!("d0^{kk}"), &faces)?;
                    for &t in &times {
                        for &x in &faces {
                            if c.robin.eval(t, x) < 0.0 {
                                return Err(Error::assumption(
                                    "DA3",
                                    format!("d0^{kk} < 0 at t = {t}, x = {x:?} (Robin requires d0 >= 0)"),
                                ));
                            }
                        }
                    }
                }
                BcKind::Dirichlet | BcKind::Neumann => {
                    if !c.robin.is_zero() {
                        return Err(Error::assumption(
                            "DA3",
                            format!("d0^{kk} must be the zero function for {:?} conditions", c.bc),
                        ));
                    }
                }
            }
            self.check_elliptic(k, &times, &nodes)?;
        }

        for which in [Coupling::Instant, Coupling::Delayed] {
            let name = if which == Coupling::Instant { "c0" } else { "c1" };
            for (k, row) in self.coupling(which).iter().enumerate() {
                for (l, e) in row.iter().enumerate() {
                    let what = format!("{name}^{}{}", k + 1, l + 1);
                    finite(e, what.clone(), &nodes)?;
                    let sup = sampled_sup(e, &times, &nodes);
                    if sup > self.k_bound * (1.0 + 1e-12) + 1e-14 {
                        return Err(Error::assumption(
                            "DA3",
                            format!("sup |{what}| = {sup} exceeds the declared bound K = {}", self.k_bound),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_elliptic(&self, k: usize, times: &[f64], nodes: &[[f64; 2]]) -> Result<()> {
        let a = &self.components[k].diffusion;
        let kk = k + 1;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dirs: &[[f64; 2]] = if self.dim == 1 {
            &[[1.0, 0.0], [-1.0, 0.0]]
        } else {
            &[
                [1.0, 0.0],
                [-1.0, 0.0],
                [0.0, 1.0],
                [0.0, -1.0],
                [s, s],
                [-s, -s],
                [s, -s],
                [-s, s],
            ]
        };
        for &t in times {
            for &x in nodes {
                let m: Vec<Vec<f64>> = a
                    .iter()
                    .map(|row| row.iter().map(|e| e.eval(t, x)).collect())
                    .collect();
                if self.dim == 2 && (m[0][1] - m[1][0]).abs() > 1e-12 * (1.0 + m[0][1].abs()) {
                    return Err(Error::assumption(
                        "DA4",
                        format!("a^{kk} is not symmetric at t = {t}, x = {x:?}"),
                    ));
                }
                for d in dirs {
                    let q: f64 = (0..self.dim)
                        .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                        .map(|(i, j)| m[i][j] * d[i] * d[j])
                        .sum();
                    if q < self.alpha0 * (1.0 - 1e-12) {
                        return Err(Error::assumption(
                            "DA4",
                            format!(
                                "ellipticity fails for a^{kk} at t = {t}, x = {x:?}: form {q} < alpha0 = {}",
                                self.alpha0
                            ),
                        ));
                    }
                }
                if self.dim == 2 {
                    let mean = 0.5 * (m[0][0] + m[1][1]);
                    let rad = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
                    if mean - rad < self.alpha0 * (1.0 - 1e-12) {
                        return Err(Error::assumption(
                            "DA4",
                            format!(
                                "smallest eigenvalue {} of a^{kk} at t = {t}, x = {x:?} is below alpha0 = {}",
                                mean - rad,
                                self.alpha0
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

const MAX_VALIDATION_SAMPLES: usize = 2_000_000;

/// Time nodes at which coefficient assumptions are sampled; strided when the
/// full space-time grid would be too large.
pub(crate) fn sample_times(time: &TimeGrid, nodes: usize) -> Vec<f64> {
    let total = (time.steps() + 1) * nodes.max(1);
    let stride = total.div_ceil(MAX_VALIDATION_SAMPLES).max(1);
    let mut out: Vec<f64> = (0..=time.steps()).step_by(stride).map(|j| time.time(j)).collect();
    if time.steps() % stride != 0 {
        out.push(time.t_end());
    }
    out
}

/// Face-centre points of the boundary cells.
pub(crate) fn boundary_points(grid: &SpatialGrid) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for face in grid.boundary_tags() {
        for idx in 0..grid.num_nodes() {
            let (i, j) = grid.multi_index(idx);
            let ij = [i, j];
            let ax = grid.axis(face.axis);
            let on = if face.upper { ij[face.axis] == ax.cells - 1 } else { ij[face.axis] == 0 };
            if on {
                let mut x = grid.node(idx);
                x[face.axis] = if face.upper { ax.hi } else { ax.lo };
                pts.push(x);
            }
        }
    }
    pts
}

fn sampled_sup(e: &CoeffExpr, times: &[f64], nodes: &[[f64; 2]]) -> f64 {
    if let Some(c) = e.as_constant() {
        return c.abs();
    }
    let times: &[f64] = if e.depends_on_time() { times } else { &times[..1] };
    let nodes: &[[f64; 2]] = if e.depends_on_space() { nodes } else { &nodes[..1] };
    let mut sup = 0.0_f64;
    for &t in times {
        for &x in nodes {
            sup = sup.max(e.eval(t, x).abs());
        }
    }
    sup
}

/// An `n × n` matrix of (per-entry) values, e.g. `‖c_i^{kl}(t, ·)‖_{L∞(D)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSample {
    pub entries: Vec<Vec<f64>>,
}

impl MatrixSample {
    pub fn new(entries: Vec<Vec<f64>>) -> Self {
        MatrixSample { entries }
    }

    /// Entry sup-norms over the grid of `c_i(t, ·)`.
    pub fn of_coupling(a: &ParameterPoint, which: Coupling, t: f64, grid: &SpatialGrid) -> Self {
        let nodes: Vec<[f64; 2]> = grid.nodes().collect();
        MatrixSample {
            entries: a
                .coupling(which)
                .iter()
                .map(|row| row.iter().map(|e| sampled_sup(e, &[t], &nodes)).collect())
                .collect(),
        }
    }
}

fn inner_norm(row: &[f64], xi: Exponent) -> f64 {
    match xi {
        Exponent::Infinity => row.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Exponent::Finite(x) => row.iter().map(|v| v.abs().powf(x)).sum::<f64>().powf(1.0 / x),
    }
}

/// `‖g‖_{ξ,η}`: the inner `ξ`-norm runs over the columns `l` of each row `k`,
/// the outer `η`-norm over the rows.
pub fn matrix_norm(g: &MatrixSample, xi: Exponent, eta: Exponent) -> f64 {
    let rows = g.entries.iter().map(|row| inner_norm(row, xi));
    match eta {
        Exponent::Infinity => rows.fold(0.0, f64::max),
        Exponent::Finite(e) => rows.map(|r| r.powf(e)).sum::<f64>().powf(1.0 / e),
    }
}

/// `(𝒞^i_a(t) u)^k = Σ_l c_i^{kl}(t, ·) u^l`.
pub fn apply_mult(a: &ParameterPoint, which: Coupling, t: f64, u: &GridFunction) -> Result<GridFunction> {
    if u.n() != a.n() {
        return Err(Error::GridMismatch(format!(
            "function has {} components, parameter point has {}",
            u.n(),
            a.n()
        )));
    }
    let grid = u.grid().clone();
    let m = grid.num_nodes();
    let mut out = GridFunction::zeros(grid.clone(), a.n());
    for (k, row) in a.coupling(which).iter().enumerate() {
        for (l, e) in row.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let src = u.component(l).to_vec();
            let dst = out.component_mut(k);
            for idx in 0..m {
                dst[idx] += e.eval(t, grid.node(idx)) * src[idx];
            }
        }
    }
    Ok(out)
}

/// `K`: the largest sampled `|c_i^{kl}|` over a batch of parameter points.
pub fn sup_bound_k(batch: &[ParameterPoint], grid: &SpatialGrid, time: &TimeGrid) -> f64 {
    let times: Vec<f64> = time.times().collect();
    let nodes: Vec<[f64; 2]> = grid.nodes().collect();
    batch
        .iter()
        .flat_map(|a| a.c0.iter().chain(&a.c1).flatten())
        .map(|e| sampled_sup(e, &times, &nodes))
        .fold(0.0, f64::max)
}

/// Shape of the perturbation added by [`weakstar_oscillate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OscillationMode {
    /// `amp · sin(2π m t)`.
    Time,
    /// `amp · sin(2π m x1)`.
    Space,
    /// `amp`, independent of `m`: not weak-* null, a negative control.
    Constant,
}

/// Which coupling entries a perturbation touches. Only `c₀`/`c₁` may be
/// perturbed; the higher-order part stays fixed along every sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTargets {
    pub instant: bool,
    pub delayed: bool,
}

impl Default for PerturbationTargets {
    fn default() -> Self {
        PerturbationTargets {
            instant: true,
            delayed: true,
        }
    }
}

/// `base` with every targeted coupling entry `c` replaced by `c + amp·φ_m`.
///
/// Fails with a DA3 violation when the perturbed point leaves the declared
/// `K` bound on the sampled space-time grid.
pub fn weakstar_oscillate(
    base: &ParameterPoint,
    m: u32,
    amp: f64,
    mode: OscillationMode,
    targets: &PerturbationTargets,
    grid: &SpatialGrid,
    time: &TimeGrid,
) -> Result<ParameterPoint> {
    if m == 0 {
        return Err(Error::Precondition("oscillation index must be positive".into()));
    }
    let mut out = base.clone();
    if amp == 0.0 {
        return Ok(out);
    }
    let wave = match mode {
        OscillationMode::Time => CoeffExpr::sine_wave(amp, m as f64, Var::T),
        OscillationMode::Space => CoeffExpr::sine_wave(amp, m as f64, Var::X1),
        OscillationMode::Constant => CoeffExpr::constant(amp),
    };
    for (which, on) in [
        (Coupling::Instant, targets.instant),
        (Coupling::Delayed, targets.delayed),
    ] {
        if !on {
            continue;
        }
        for e in out.coupling_mut(which).iter_mut().flatten() {
            *e = e.plus(&wave);
        }
    }
    let times = sample_times(time, grid.num_nodes());
    let nodes: Vec<[f64; 2]> = grid.nodes().collect();
    for e in out.c0.iter().chain(&out.c1).flatten() {
        let sup = sampled_sup(e, &times, &nodes);
        if sup > out.k_bound * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::assumption(
                "DA3",
                format!(
                    "perturbation amp = {amp} pushes a coupling entry to {sup} > K = {}",
                    out.k_bound
                ),
            ));
        }
    }
    Ok(out)
}

/// Shared handle for a validated point.
pub type SharedPoint = Arc<ParameterPoint>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(cells: usize) -> Arc<SpatialGrid> {
        Arc::new(SpatialGrid::interval(0.0, 1.0, cells).unwrap())
    }

    #[test]
    fn matrix_norm_examples() {
        let id = MatrixSample::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(matrix_norm(&id, Exponent::Infinity, Exponent::Infinity), 1.0);
        let g = MatrixSample::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(matrix_norm(&g, Exponent::ONE, Exponent::Infinity), 7.0);
        assert_eq!(matrix_norm(&g, Exponent::Infinity, Exponent::ONE), 6.0);
        assert_eq!(matrix_norm(&g, Exponent::ONE, Exponent::ONE), 10.0);
        // (Σ_k (Σ_l g²)^{1})^{1/2} = Frobenius
        assert!((matrix_norm(&g, Exponent::TWO, Exponent::TWO) - 30.0_f64.sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn matrix_norms_bounded_by_one_one(
            entries in proptest::collection::vec(-5.0f64..5.0, 9),
            xi in prop_oneof![(1.0f64..8.0).prop_map(Exponent::Finite), Just(Exponent::Infinity)],
            eta in prop_oneof![(1.0f64..8.0).prop_map(Exponent::Finite), Just(Exponent::Infinity)],
        ) {
            let g = MatrixSample::new(entries.chunks(3).map(|c| c.to_vec()).collect());
            let big = matrix_norm(&g, Exponent::ONE, Exponent::ONE);
            prop_assert!(matrix_norm(&g, xi, eta) <= big * (1.0 + 1e-12));
        }
    }

    #[test]
    fn swap_and_zero_multiplication() {
        let g = grid1(8);
        let a = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
            .with_constant_coupling(Coupling::Instant, &[&[0.0, 1.0], &[1.0, 0.0]])
            .with_k_bound(1.0);
        let u = GridFunction::from_fn(g.clone(), 2, |k, x| if k == 0 { x[0] } else { 1.0 - x[0] });
        let v = apply_mult(&a, Coupling::Instant, 0.0, &u).unwrap();
        assert_eq!(v.component(0), u.component(1));
        assert_eq!(v.component(1), u.component(0));
        let z = apply_mult(&a, Coupling::Delayed, 0.0, &u).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let wrong = GridFunction::zeros(g, 3);
        assert!(apply_mult(&a, Coupling::Instant, 0.0, &wrong).is_err());
    }

    #[test]
    fn multiplication_ratio_below_matrix_norm() {
        let g = grid1(32);
        let a = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
            .with_coupling(
                Coupling::Instant,
                vec![
                    vec![CoeffExpr::parse("sin(3*x1)").unwrap(), CoeffExpr::parse("0.5").unwrap()],
                    vec![CoeffExpr::parse("0-0.25").unwrap(), CoeffExpr::parse("cos(t+x1)").unwrap()],
                ],
            )
            .with_k_bound(1.0);
        let t = 0.3;
        let sample = MatrixSample::of_coupling(&a, Coupling::Instant, t, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [Exponent::ONE, Exponent::TWO, Exponent::Finite(4.0), Exponent::Infinity] {
            let bound = matrix_norm(&sample, p.conjugate(), p);
            for _ in 0..50 {
                let u = GridFunction::from_fn(g.clone(), 2, |_, _| rng.gen_range(-1.0..1.0));
                let cu = apply_mult(&a, Coupling::Instant, t, &u).unwrap();
                let ratio = crate::grid::lp_norm(&cu, p) / crate::grid::lp_norm(&u, p);
                assert!(ratio <= bound + 1e-12, "p = {p}: {ratio} > {bound}");
                assert!(ratio <= 4.0 * a.k_bound + 1e-12);
            }
        }
        // swap matrix: ratio exactly 1 against ‖c‖_{2,2} = √2
        let swap = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
            .with_constant_coupling(Coupling::Instant, &[&[0.0, 1.0], &[1.0, 0.0]])
            .with_k_bound(1.0);
        let s = MatrixSample::of_coupling(&swap, Coupling::Instant, 0.0, &g);
        assert!((matrix_norm(&s, Exponent::TWO, Exponent::TWO) - 2.0_f64.sqrt()).abs() < 1e-15);
        let u = GridFunction::from_fn(g, 2, |_, _| rng.gen_range(-1.0..1.0));
        let cu = apply_mult(&swap, Coupling::Instant, 0.0, &u).unwrap();
        let ratio = crate::grid::lp_norm(&cu, Exponent::TWO) / crate::grid::lp_norm(&u, Exponent::TWO);
        assert!((ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn multiplication_is_linear() {
        let g = grid1(16);
        let a = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
            .with_constant_coupling(Coupling::Delayed, &[&[0.3, -0.7], &[0.125, 0.5]])
            .with_k_bound(1.0);
        let u = GridFunction::from_fn(g.clone(), 2, |k, x| (k as f64 + x[0]).sin());
        let v = GridFunction::from_fn(g, 2, |k, x| (k as f64 * x[0]).cos());
        let (al, be) = (0.5, -2.0);
        let mut lin = u.scaled(al);
        lin.axpy(be, &v);
        let lhs = apply_mult(&a, Coupling::Delayed, 0.0, &lin).unwrap();
        let mut rhs = apply_mult(&a, Coupling::Delayed, 0.0, &u).unwrap().scaled(al);
        rhs.axpy(be, &apply_mult(&a, Coupling::Delayed, 0.0, &v).unwrap());
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).abs() <= 1e-15 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn sup_bound_examples() {
        let g = grid1(4);
        let tg = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let zero = ParameterPoint::heat(2, 1, BcKind::Dirichlet);
        assert_eq!(sup_bound_k(&[zero.clone()], &g, &tg), 0.0);
        let three = zero.clone().with_constant_coupling(Coupling::Instant, &[&[3.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(sup_bound_k(&[three], &g, &tg), 3.0);
        let sine = ParameterPoint::heat(1, 1, BcKind::Dirichlet).with_coupling(
            Coupling::Instant,
            vec![vec![CoeffExpr::parse("sin(2*3.141592653589793*t)").unwrap()]],
        );
        assert!((sup_bound_k(&[sine], &g, &tg) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn ellipticity_and_symmetry_checks() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4)).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.5).unwrap();
        let ok = ParameterPoint::heat(1, 2, BcKind::Neumann);
        ok.validate(&g, &tg).unwrap();

        let mut skew = ok.clone();
        skew.components[0].diffusion[0][1] = CoeffExpr::constant(0.3);
        match skew.validate(&g, &tg) {
            Err(Error::Assumption { assumption, .. }) => assert_eq!(assumption, "DA4"),
            other => panic!("{other:?}"),
        }
        // symmetric but indefinite along the diagonal
        let mut weak = ok.clone();
        weak.components[0].diffusion[0][1] = CoeffExpr::constant(0.99);
        weak.components[0].diffusion[1][0] = CoeffExpr::constant(0.99);
        assert!(matches!(weak.validate(&g, &tg), Err(Error::Assumption { assumption: "DA4", .. })));

        let mut timed = ok.clone();
        timed.components[0].diffusion[1][1] = CoeffExpr::parse("1 - t").unwrap();
        assert!(matches!(timed.validate(&g, &tg), Err(Error::Assumption { assumption: "DA4", .. })));
    }

    #[test]
    fn boundary_and_bound_checks() {
        let g = grid1(8);
        let tg = TimeGrid::new(0.0, 1.0, 0.25).unwrap();
        let mut a = ParameterPoint::heat(1, 1, BcKind::Robin);
        a.components[0].robin = CoeffExpr::parse("x1 - 0.5").unwrap();
        assert!(matches!(a.validate(&g, &tg), Err(Error::Assumption { assumption: "DA3", .. })));
        let mut d = ParameterPoint::heat(1, 1, BcKind::Dirichlet);
        d.components[0].robin = CoeffExpr::constant(1.0);
        assert!(matches!(d.validate(&g, &tg), Err(Error::Assumption { assumption: "DA3", .. })));
        let big = ParameterPoint::heat(1, 1, BcKind::Dirichlet)
            .with_constant_coupling(Coupling::Instant, &[&[2.0]])
            .with_k_bound(1.0);
        assert!(matches!(big.validate(&g, &tg), Err(Error::Assumption { assumption: "DA3", .. })));
        let blowup = ParameterPoint::heat(1, 1, BcKind::Dirichlet)
            .with_coupling(Coupling::Instant, vec![vec![CoeffExpr::parse("1/(x1-x1)").unwrap()]])
            .with_k_bound(1.0);
        assert!(matches!(blowup.validate(&g, &tg), Err(Error::Assumption { assumption: "DA2", .. })));
    }

    #[test]
    fn oscillation_preserves_base_and_distance() {
        let g = grid1(16);
        let tg = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let base = ParameterPoint::heat(2, 1, BcKind::Dirichlet)
            .with_constant_coupling(Coupling::Instant, &[&[0.2, 0.1], &[0.1, 0.2]])
            .with_k_bound(1.0);
        let t = PerturbationTargets::default();
        let same = weakstar_oscillate(&base, 3, 0.0, OscillationMode::Time, &t, &g, &tg).unwrap();
        assert_eq!(same, base);
        for m in [1, 4, 16] {
            let p = weakstar_oscillate(&base, m, 0.5, OscillationMode::Time, &t, &g, &tg).unwrap();
            assert!(p.same_principal_part(&base));
            let mut dist = 0.0_f64;
            for t in tg.times() {
                dist = dist.max((p.c0[0][0].eval(t, [0.5, 0.0]) - 0.2).abs());
            }
            assert!((dist - 0.5).abs() < 1e-4, "m = {m}: {dist}");
        }
        assert!(weakstar_oscillate(&base, 2, 0.9, OscillationMode::Time, &t, &g, &tg).is_err());
    }

    #[test]
    fn oscillation_window_average_decays() {
        // (1/T)∫_0^T sin(2πmt) dt = (1 - cos 2πmT)/(2πmT); for T = 0.3, m = 16 below 1/(2π·16)·2/T
        let wave = CoeffExpr::sine_wave(1.0, 16.0, Var::T);
        let t_end = 1.0;
        let steps = 100_000;
        let avg: f64 = (0..steps)
            .map(|i| wave.eval((i as f64 + 0.5) * t_end / steps as f64, [0.0; 2]))
            .sum::<f64>()
            / steps as f64;
        assert!(avg.abs() <= 1.0 / (2.0 * std::f64::consts::PI * 16.0));
    }

    #[test]
    fn weakstar_functionals_decrease() {
        // ⟨c_m - c, φ⟩ over a battery of smooth test functions φ(t, x) on (0,1)²
        let battery: Vec<Box<dyn Fn(f64, f64) -> f64>> = (0..10)
            .map(|i| {
                let w = 0.5 + i as f64 * 0.37;
                Box::new(move |t: f64, x: f64| (w * t + 0.3 * i as f64).cos() * (1.0 + x * w).exp() / (1.0 + t))
                    as Box<dyn Fn(f64, f64) -> f64>
            })
            .collect();
        let n = 400;
        let h = 1.0 / n as f64;
        for phi in &battery {
            let mut prev = f64::INFINITY;
            let mut first = None;
            for m in [1u32, 2, 4, 8, 16, 32, 64] {
                let wave = CoeffExpr::sine_wave(0.5, m as f64, Var::T);
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let (t, x) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                        s += wave.eval(t, [x, 0.0]) * phi(t, x) * h * h;
                    }
                }
                let s = s.abs();
                assert!(s <= 1.5 * prev, "m = {m}: {s} vs {prev}");
                first.get_or_insert(s);
                prev = s;
            }
            assert!(prev <= 0.2 * first.unwrap());
        }
    }

    #[test]
    fn adjoint_coefficients() {
        let mut c = ComponentCoeffs::laplacian(2, BcKind::Robin);
        c.diffusion[0][1] = CoeffExpr::constant(0.2);
        c.diffusion[1][0] = CoeffExpr::constant(0.2);
        c.drift_div[0] = CoeffExpr::constant(0.5);
        c.drift[1] = CoeffExpr::parse("x1").unwrap();
        let a = c.adjoint();
        assert_eq!(a.drift_div[1].eval(0.0, [2.0, 0.0]), -2.0);
        assert_eq!(a.drift[0].as_constant(), Some(-0.5));
        assert_eq!(a.adjoint(), {
            let mut back = c.clone();
            back.drift_div[0] = CoeffExpr::constant(0.5);
            back
        }
        .adjoint()
        .adjoint());
        assert!(!c.is_self_adjoint());
        let _ = rand::thread_rng().gen::<u8>();
    }
}

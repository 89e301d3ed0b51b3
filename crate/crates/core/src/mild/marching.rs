use super::{solve_small, MildProblem, Quadrature};
use crate::coeff::Coupling;
use crate::error::Result;
use crate::grid::{HistorySegment, Provenance, Trajectory};

/// One-step Duhamel recursion
/// `u_{j+1} = P_j(u_j + dt/2 g_j) + dt/2 g_{j+1}` (trapezoid) or
/// `u_{j+1} = P_j(u_j + dt g_j)` (left rectangle).
///
/// The trapezoid rule is implicit in `u_{j+1}` through `c₀(t_{j+1})`; that
/// pointwise `n × n` system is solved exactly at every node, so the result
/// is the fixed point of the same discrete equations Picard iterates.
pub fn solve_marching(problem: &MildProblem, h: &HistorySegment, quad: Quadrature, start: usize) -> Result<Trajectory> {
    problem.check_history(h, start)?;
    let fam = problem.propagator();
    let table = problem.table();
    let time = *problem.time();
    let dt = time.dt();
    let n = fam.n();
    let m = fam.grid().num_nodes();
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(time.steps() - start + 1);
    u.push(h.head().values().to_vec());
    let mut g = problem.forcing(h, &u, start, start);
    let w = if quad == Quadrature::Trapezoid { 0.5 * dt } else { dt };
    let mut mat = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for j in start..time.steps() {
        let mut x = u[j - start].clone();
        for (a, b) in x.iter_mut().zip(&g) {
            *a += w * b;
        }
        fam.step(j, &mut x)?;
        if quad == Quadrature::Trapezoid {
            let delayed = problem.delayed(h, &u, start, j + 1).to_vec();
            table.apply_add(Coupling::Delayed, j + 1, &delayed, 0.5 * dt, &mut x);
            if let Some(c0) = table.slice(Coupling::Instant, j + 1) {
                for idx in 0..m {
                    for k in 0..n {
                        for l in 0..n {
                            let id = if k == l { 1.0 } else { 0.0 };
                            mat[k * n + l] = id - 0.5 * dt * c0[(k * n + l) * m + idx];
                        }
                        rhs[k] = x[k * m + idx];
                    }
                    solve_small(n, &mut mat, &mut rhs)?;
                    for k in 0..n {
                        x[k * m + idx] = rhs[k];
                    }
                }
            }
        }
        u.push(x);
        g = problem.forcing(h, &u, start, j + 1);
    }
    problem.trajectory(h, start, u, Provenance::Marching)
}

/// Direct θ-stepping of the coupled system with the coupling and delay terms
/// explicit: `(I + θ dt A_j) u_{j+1} = (I − (1−θ) dt A_j) u_j + dt g_j`.
/// First order in `dt`; an independent cross-check of the Duhamel solvers.
pub fn solve_monolithic(problem: &MildProblem, h: &HistorySegment, start: usize) -> Result<Trajectory> {
    problem.check_history(h, start)?;
    let fam = problem.propagator();
    let time = *problem.time();
    let dt = time.dt();
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(time.steps() - start + 1);
    u.push(h.head().values().to_vec());
    for j in start..time.steps() {
        let mut g = problem.forcing(h, &u, start, j);
        let mut x = u[j - start].clone();
        fam.step(j, &mut x)?;
        if g.iter().any(|&v| v != 0.0) {
            fam.implicit_solve(j, &mut g)?;
            for (a, b) in x.iter_mut().zip(&g) {
                *a += dt * b;
            }
        }
        u.push(x);
    }
    problem.trajectory(h, start, u, Provenance::Oracle)
}

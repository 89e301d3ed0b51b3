use super::banded::BandMatrix;
use crate::coeff::{BcKind, ComponentCoeffs};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// The bilinear form `B^k[t; ·, ·]` of one component on the grid: a band
/// operator `A` with `⟨A u, v⟩ ≈ B[t; u, v]`, so the equation reads `u' = -A u`.
#[derive(Clone, Debug)]
pub struct DiscreteForm {
    matrix: BandMatrix,
    cell_volume: f64,
}

impl DiscreteForm {
    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> BandMatrix {
        self.matrix
    }

    /// `B[t; u, v] ≈ Σ_cells (A u) v |cell|`.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.quadratic(v, u) * self.cell_volume
    }
}

/// Half bandwidth of the stencil on `grid`.
pub(crate) fn stencil_width(grid: &SpatialGrid) -> usize {
    if grid.dim() == 1 {
        1
    } else {
        grid.axis(0).cells + 1
    }
}

/// Finite-volume assembly of `-Σ∂_i(Σ a_ij ∂_j u + a_i u) - Σ b_i ∂_i u` with
/// the boundary operator of `comp.bc`.
///
/// Face diffusion and `a_i` are arithmetic means of the two nodal values;
/// boundary faces use the coefficients at the face centre and eliminate the
/// face value from the flux condition over the half cell.
pub fn assemble_form(comp: &ComponentCoeffs, t: f64, grid: &SpatialGrid) -> Result<DiscreteForm> {
    let dim = grid.dim();
    if comp.diffusion.len() != dim {
        return Err(Error::GridMismatch(format!(
            "coefficients are {}-dimensional, grid is {dim}-dimensional",
            comp.diffusion.len()
        )));
    }
    let m = grid.num_nodes();
    let w = stencil_width(grid);
    let mut a = BandMatrix::zeros(m, w, w);
    let cells = [grid.axis(0).cells, if dim == 2 { grid.axis(1).cells } else { 1 }];

    let nodal = |e: &crate::coeff::CoeffExpr| -> Vec<f64> {
        match e.as_constant() {
            Some(c) => vec![c; m],
            None => grid.nodes().map(|x| e.eval(t, x)).collect(),
        }
    };
    let diff: Vec<Vec<Vec<f64>>> = comp
        .diffusion
        .iter()
        .map(|row| row.iter().map(nodal).collect())
        .collect();
    let drift_div: Vec<Vec<f64>> = comp.drift_div.iter().map(nodal).collect();
    let drift: Vec<Vec<f64>> = comp.drift.iter().map(nodal).collect();

    for idx in 0..m {
        let d = &diff;
        let lo = if dim == 1 {
            d[0][0][idx]
        } else {
            let (p, q, r) = (d[0][0][idx], d[0][1][idx], d[1][1][idx]);
            0.5 * (p + r) - (0.25 * (p - r).powi(2) + q * q).sqrt()
        };
        if !(lo > 0.0) {
            return Err(Error::assumption(
                "DA4",
                format!("diffusion not positive definite at t = {t}, x = {:?}", grid.node(idx)),
            ));
        }
    }

    let ghost_sign = if comp.bc == BcKind::Dirichlet { -1.0 } else { 1.0 };

    for idx in 0..m {
        let (i, j) = grid.multi_index(idx);
        let ij = [i, j];
        for ax in 0..dim {
            let h = grid.spacing(ax);
            let b = drift[ax][idx];
            for upper in [false, true] {
                let sigma = if upper { 1.0 } else { -1.0 };
                let inside = if upper { ij[ax] + 1 < cells[ax] } else { ij[ax] > 0 };
                if inside {
                    let mut nb = ij;
                    nb[ax] = if upper { nb[ax] + 1 } else { nb[ax] - 1 };
                    let nidx = grid.index(nb[0], nb[1]);
                    let af = 0.5 * (diff[ax][ax][idx] + diff[ax][ax][nidx]);
                    let cf = 0.5 * (drift_div[ax][idx] + drift_div[ax][nidx]);
                    a.add(idx, idx, af / (h * h) - cf * sigma / (2.0 * h));
                    a.add(idx, nidx, -af / (h * h) - cf * sigma / (2.0 * h) - b * sigma / (2.0 * h));
                } else {
                    let mut xf = grid.node(idx);
                    let axis = grid.axis(ax);
                    xf[ax] = if upper { axis.hi } else { axis.lo };
                    let af = comp.diffusion[ax][ax].eval(t, xf);
                    // u_ghost = g · u_P
                    let g = match comp.bc {
                        BcKind::Dirichlet => {
                            a.add(idx, idx, 2.0 * af / (h * h));
                            -1.0
                        }
                        BcKind::Neumann | BcKind::Robin => {
                            let cf = comp.drift_div[ax].eval(t, xf);
                            let d0 = comp.robin.eval(t, xf);
                            let denom = 2.0 * af / h + d0 + sigma * cf;
                            if !(denom > 0.0) {
                                return Err(Error::Solve(format!(
                                    "boundary elimination degenerates at x = {xf:?}; refine the grid"
                                )));
                            }
                            let kappa = (2.0 * af / h) / denom;
                            a.add(idx, idx, d0 * kappa / h);
                            2.0 * kappa - 1.0
                        }
                    };
                    a.add(idx, idx, -b * sigma * g / (2.0 * h));
                }
            }
        }
        if dim == 2 {
            add_cross_terms(&mut a, grid, &diff, idx, cells, ghost_sign);
        }
    }
    Ok(DiscreteForm {
        matrix: a,
        cell_volume: grid.cell_volume(),
    })
}

/// `-∂₁(a₁₂ ∂₂u) - ∂₂(a₂₁ ∂₁u)` by the 4-point cross stencil; cells beyond
/// the boundary are reflections carrying `ghost_sign`.
fn add_cross_terms(
    a: &mut BandMatrix,
    grid: &SpatialGrid,
    diff: &[Vec<Vec<f64>>],
    idx: usize,
    cells: [usize; 2],
    ghost_sign: f64,
) {
    let (i, j) = grid.multi_index(idx);
    let scale = 1.0 / (4.0 * grid.spacing(0) * grid.spacing(1));
    let resolve = |ii: i64, jj: i64| -> (usize, f64) {
        let mut s = 1.0;
        let clamp = |v: i64, n: usize, s: &mut f64| -> usize {
            if v < 0 {
                *s *= ghost_sign;
                0
            } else if v as usize >= n {
                *s *= ghost_sign;
                n - 1
            } else {
                v as usize
            }
        };
        let ci = clamp(ii, cells[0], &mut s);
        let cj = clamp(jj, cells[1], &mut s);
        (grid.index(ci, cj), s)
    };
    let coef_at = |k: usize, ii: i64, jj: i64| -> f64 {
        let ci = ii.clamp(0, cells[0] as i64 - 1) as usize;
        let cj = jj.clamp(0, cells[1] as i64 - 1) as usize;
        diff[k / 2][k % 2][grid.index(ci, cj)]
    };
    let (i, j) = (i as i64, j as i64);
    // [a12(E)(u_NE - u_SE) - a12(W)(u_NW - u_SW)] + [a21(N)(u_NE - u_NW) - a21(S)(u_SE - u_SW)]
    let a12e = coef_at(1, i + 1, j);
    let a12w = coef_at(1, i - 1, j);
    let a21n = coef_at(2, i, j + 1);
    let a21s = coef_at(2, i, j - 1);
    let terms = [
        (i + 1, j + 1, a12e + a21n),
        (i + 1, j - 1, -a12e - a21s),
        (i - 1, j + 1, -a12w - a21n),
        (i - 1, j - 1, a12w + a21s),
    ];
    for (ii, jj, c) in terms {
        if c == 0.0 {
            continue;
        }
        let (col, s) = resolve(ii, jj);
        a.add(idx, col, -c * s * scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoeffExpr;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_energy_of_sine() {
        // ∫_0^π (sin')² = π/2
        for cells in [50, 200] {
            let g = SpatialGrid::interval(0.0, PI, cells).unwrap();
            let f = assemble_form(&ComponentCoeffs::laplacian(1, BcKind::Dirichlet), 0.0, &g).unwrap();
            let u: Vec<f64> = g.nodes().map(|x| x[0].sin()).collect();
            let e = f.eval(&u, &u);
            assert!((e - PI / 2.0).abs() < 1e-3, "{cells}: {e}");
        }
    }

    #[test]
    fn constants_in_neumann_kernel() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 2.0), (6, 5)).unwrap();
        let mut c = ComponentCoeffs::laplacian(2, BcKind::Neumann);
        c.diffusion[0][0] = CoeffExpr::parse("1 + x1*x2").unwrap();
        c.diffusion[0][1] = CoeffExpr::constant(0.3);
        c.diffusion[1][0] = CoeffExpr::constant(0.3);
        c.drift[1] = CoeffExpr::parse("sin(x1)").unwrap();
        let f = assemble_form(&c, 0.0, &g).unwrap();
        let one = vec![1.0; g.num_nodes()];
        let mut out = vec![0.0; g.num_nodes()];
        f.matrix().matvec(&one, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12), "{out:?}");
    }

    #[test]
    fn robin_boundary_measure() {
        // d0 = 1 on (0,1), u = v = 1: two boundary points -> form value 2 as h -> 0
        let mut c = ComponentCoeffs::laplacian(1, BcKind::Robin);
        c.robin = CoeffExpr::constant(1.0);
        let mut prev = f64::INFINITY;
        for cells in [10, 100, 1000] {
            let g = SpatialGrid::interval(0.0, 1.0, cells).unwrap();
            let f = assemble_form(&c, 0.0, &g).unwrap();
            let one = vec![1.0; cells];
            let err = (f.eval(&one, &one) - 2.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 2e-3);
    }

    #[test]
    fn symmetric_without_first_order_terms() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), (5, 4)).unwrap();
        for bc in [BcKind::Dirichlet, BcKind::Neumann] {
            let mut c = ComponentCoeffs::laplacian(2, bc);
            c.diffusion[1][1] = CoeffExpr::parse("2 + x1").unwrap();
            let f = assemble_form(&c, 0.0, &g).unwrap();
            let m = f.matrix();
            for r in 0..g.num_nodes() {
                for s in 0..g.num_nodes() {
                    assert!((m.get(r, s) - m.get(s, r)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn form_is_linear_in_coefficients() {
        let g = SpatialGrid::interval(0.0, 1.0, 12).unwrap();
        let mut c1 = ComponentCoeffs::laplacian(1, BcKind::Robin);
        c1.drift_div[0] = CoeffExpr::parse("x1").unwrap();
        c1.drift[0] = CoeffExpr::parse("0.5").unwrap();
        let f1 = assemble_form(&c1, 0.0, &g).unwrap();
        let mut c2 = c1.clone();
        c2.drift[0] = CoeffExpr::parse("1.5").unwrap();
        let f2 = assemble_form(&c2, 0.0, &g).unwrap();
        let mut c3 = c1.clone();
        c3.drift[0] = CoeffExpr::parse("2").unwrap();
        let f3 = assemble_form(&c3, 0.0, &g).unwrap();
        for r in 0..12 {
            for s in 0..12 {
                let lin = f1.matrix().get(r, s) + f2.matrix().get(r, s) - f3.matrix().get(r, s);
                // b enters linearly; the remainder is the b-free part of f1
                let mut c0 = c1.clone();
                c0.drift[0] = CoeffExpr::zero();
                let f0 = assemble_form(&c0, 0.0, &g).unwrap();
                assert!((lin - f0.matrix().get(r, s)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_degenerate_diffusion() {
        let g = SpatialGrid::interval(0.0, 1.0, 8).unwrap();
        let mut c = ComponentCoeffs::laplacian(1, BcKind::Dirichlet);
        c.diffusion[0][0] = CoeffExpr::parse("x1 - 0.5").unwrap();
        assert!(matches!(assemble_form(&c, 0.0, &g), Err(Error::Assumption { .. })));
    }
}

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored row by
/// row: entry `(i, j)` lives at `data[i·(kl+ku+1) + (j + kl - i)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `alpha·I + beta·self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> BandMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= beta;
        }
        for i in 0..self.n {
            let s = out.slot(i, i);
            out.data[s] += alpha;
        }
        out
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for j in self.cols(i) {
                s += self.data[self.slot(i, j)] * x[j];
            }
            *yi = s;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y[..self.n].fill(0.0);
        for i in 0..self.n {
            let xi = x[i];
            for j in self.cols(i) {
                y[j] += self.data[self.slot(i, j)] * xi;
            }
        }
    }

    /// `Σ_i x_i (A y)_i`.
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.n];
        self.matvec(y, &mut ay);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// LU factorization without pivoting, so that the same factors serve
    /// `A x = b` and `Aᵀ x = b` and transposed products stay exact duals.
    pub fn factor(&self) -> Result<BandLu> {
        let mut lu = self.clone();
        let n = self.n;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = lu.data[lu.slot(k, k)];
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::Solve(format!("zero pivot {pivot:e} in row {k}")));
            }
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.ku).min(n - 1);
            for i in k + 1..=last_row {
                let si = lu.slot(i, k);
                let l = lu.data[si] / pivot;
                lu.data[si] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let a = lu.data[lu.slot(k, j)];
                    let s = lu.slot(i, j);
                    lu.data[s] -= l * a;
                }
            }
        }
        Ok(BandLu { lu })
    }
}

/// Packed `L` (unit lower) and `U` factors of a band matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn size(&self) -> usize {
        self.lu.n
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(a.kl)..i {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + a.ku + 1).min(n) {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
    }

    /// Overwrites `b` with `A⁻ᵀ b` (`Uᵀ` forward, then `Lᵀ` backward).
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(a.ku)..i {
                s -= a.data[a.slot(j, i)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + a.kl + 1).min(n) {
                s -= a.data[a.slot(j, i)] * b[j];
            }
            b[i] = s;
        }
    }
}

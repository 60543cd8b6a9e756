//! Thomas-algorithm solvers for the tridiagonal systems of the implicit steps.

use num_complex::Complex64 as C64;

/// Solve `A x = rhs` in place for tridiagonal `A` with sub-diagonal `lower`
/// (`lower[0]` unused), diagonal `diag` and super-diagonal `upper`
/// (`upper[n-1]` unused). `scratch` must hold `n` elements.
///
/// No pivoting: the implicit-step matrices are diagonally dominant.
pub fn solve_in_place(lower: &[C64], diag: &[C64], upper: &[C64], rhs: &mut [C64], scratch: &mut [C64]) {
    let n = rhs.len();
    debug_assert!(lower.len() >= n && diag.len() >= n && upper.len() >= n && scratch.len() >= n);
    if n == 0 {
        return;
    }
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
}

/// Pre-factorized constant real tridiagonal matrix, applied to many
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct RealTridiagLu {
    lower: Vec<f64>,
    inv_beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl RealTridiagLu {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        let mut inv_beta = vec![0.0; n];
        let mut gamma = vec![0.0; n];
        let mut beta = diag[0];
        inv_beta[0] = 1.0 / beta;
        for i in 1..n {
            gamma[i - 1] = upper[i - 1] / beta;
            beta = diag[i] - lower[i] * gamma[i - 1];
            inv_beta[i] = 1.0 / beta;
        }
        Self { lower: lower[..n].to_vec(), inv_beta, gamma }
    }

    pub fn len(&self) -> usize {
        self.inv_beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_beta.is_empty()
    }

    /// Solve one system in place.
    pub fn solve(&self, x: &mut [C64]) {
        let n = self.len();
        x[0] *= self.inv_beta[0];
        for i in 1..n {
            x[i] = (x[i] - x[i - 1] * self.lower[i]) * self.inv_beta[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= next * self.gamma[i];
        }
    }

    /// Solve `width` interleaved systems at once: element `k` of system `s`
    /// lives at `x[k * width + s]`.
    pub fn solve_strided(&self, x: &mut [C64], width: usize) {
        let n = self.len();
        for s in 0..width {
            x[s] *= self.inv_beta[0];
        }
        for i in 1..n {
            let (done, rest) = x.split_at_mut(i * width);
            let prev = &done[(i - 1) * width..];
            let (l, ib) = (self.lower[i], self.inv_beta[i]);
            for (cur, p) in rest[..width].iter_mut().zip(prev) {
                *cur = (*cur - *p * l) * ib;
            }
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * width);
            let cur = &mut head[i * width..];
            let g = self.gamma[i];
            for (c, nx) in cur.iter_mut().zip(&tail[..width]) {
                *c -= *nx * g;
            }
        }
    }
}

//! Dense symmetric eigensolver wrapper and a small complex solver.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric `n x n` matrix given row-major.
/// Returns ascending eigenvalues and the eigenvectors as columns of a
/// row-major `n x n` array (`vectors[i * n + k]` is component `i` of vector `k`).
pub fn symmetric_eigen(n: usize, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i]));
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Diagonalization(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|k| s[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            vectors[i * n + k] = u[(i, k)];
        }
    }
    Ok((values, vectors))
}

/// Solve the small dense complex system `a x = b` (row-major `a`) by
/// Gaussian elimination with partial pivoting.
pub fn solve_complex(n: usize, a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i * n + c].norm().total_cmp(&m[j * n + c].norm())).unwrap_or(c);
        if m[piv * n + c].norm() == 0.0 {
            return Err(Error::Diagonalization(format!("singular system at column {c}")));
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            x.swap(c, piv);
        }
        for r in c + 1..n {
            let f = m[r * n + c] / m[c * n + c];
            for k in c..n {
                let v = m[c * n + k];
                m[r * n + k] -= f * v;
            }
            let v = x[c];
            x[r] -= f * v;
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for k in c + 1..n {
            s -= m[c * n + k] * x[k];
        }
        x[c] = s / m[c * n + c];
    }
    Ok(x)
}

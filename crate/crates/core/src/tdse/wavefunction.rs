//! Complex state on the `(z, rho)` grid and simple expectation values.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridSpec2D;

/// `psi(z_i, rho_j)` stored row-major, `values[i * nr + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction2D {
    pub grid: GridSpec2D,
    pub values: Vec<C64>,
    pub t: f64,
}

impl Wavefunction2D {
    pub fn zeros(grid: GridSpec2D, t: f64) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], t }
    }

    /// Sample `f(z, rho)` on every node.
    pub fn from_fn(grid: GridSpec2D, t: f64, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let (nz, nr) = (grid.nz(), grid.nr());
        let mut values = Vec::with_capacity(nz * nr);
        for i in 0..nz {
            let z = grid.z(i);
            for j in 0..nr {
                values.push(f(z, grid.rho(j)));
            }
        }
        Self { grid, values, t }
    }

    #[inline]
    pub fn nz(&self) -> usize {
        self.grid.nz()
    }

    #[inline]
    pub fn nr(&self) -> usize {
        self.grid.nr()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.grid.nr() + j]
    }

    /// Cylindrical inner product `<self|other>` with weights `2 pi rho drho dz`.
    pub fn inner(&self, other: &Wavefunction2D) -> Result<C64> {
        self.check_grid(other)?;
        Ok(inner_raw(&self.grid, &self.values, &other.values))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr_raw(&self.grid, &self.values)
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let s = 1.0 / n;
            self.values.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn scale(&mut self, s: C64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: C64, other: &Wavefunction2D) -> Result<()> {
        self.check_grid(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn check_grid(&self, other: &Wavefunction2D) -> Result<()> {
        if self.grid.same_as(&other.grid) && self.values.len() == other.values.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// `<psi|z|psi>`, not divided by the norm.
    pub fn expectation_z(&self) -> f64 {
        let g = &self.grid;
        let w = g.radial_weights();
        let nr = g.nr();
        let mut total = 0.0;
        for (i, row) in self.values.chunks_exact(nr).enumerate() {
            let s: f64 = row.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum();
            total += g.z(i) * s;
        }
        total
    }

    /// `<psi|p_z|psi>` with the spectral momentum operator along `z`, not
    /// divided by the norm.
    pub fn expectation_pz(&self) -> f64 {
        let mut p = self.clone();
        apply_pz(&mut p.values, &self.grid);
        inner_raw(&self.grid, &self.values, &p.values).re
    }
}

pub(crate) fn inner_raw(grid: &GridSpec2D, a: &[C64], b: &[C64]) -> C64 {
    let nr = grid.nr();
    let w = grid.radial_weights();
    let mut total = C64::new(0.0, 0.0);
    for (ra, rb) in a.chunks_exact(nr).zip(b.chunks_exact(nr)) {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..nr {
            s += ra[j].conj() * rb[j] * w[j];
        }
        total += s;
    }
    total
}

pub(crate) fn norm_sqr_raw(grid: &GridSpec2D, a: &[C64]) -> f64 {
    let nr = grid.nr();
    let w = grid.radial_weights();
    let mut total = 0.0;
    for row in a.chunks_exact(nr) {
        let mut s = 0.0;
        for j in 0..nr {
            s += row[j].norm_sqr() * w[j];
        }
        total += s;
    }
    total
}

/// Angular wavenumbers of an FFT of length `n` with spacing `h`. The Nyquist
/// bin of an even transform is assigned zero so the operator stays Hermitian.
pub fn fft_wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|k| {
            if 2 * k < n {
                k as f64 * dk
            } else if 2 * k == n {
                0.0
            } else {
                (k as f64 - n as f64) * dk
            }
        })
        .collect()
}

/// Column FFT helper along `z` for a row-major `(nz, nr)` block.
pub(crate) struct ColumnFft {
    nz: usize,
    nr: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ColumnFft {
    pub(crate) fn new(nz: usize, nr: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { nz, nr, fwd: planner.plan_fft_forward(nz), inv: planner.plan_fft_inverse(nz) }
    }

    /// Transform every column, multiply bin `k` by `f(k)`, transform back.
    pub(crate) fn filter(&self, values: &mut [C64], f: impl Fn(usize) -> C64) {
        let (nz, nr) = (self.nz, self.nr);
        let mut col = vec![C64::new(0.0, 0.0); nz];
        let mut scratch = vec![C64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())];
        let norm = 1.0 / nz as f64;
        for j in 0..nr {
            for i in 0..nz {
                col[i] = values[i * nr + j];
            }
            self.fwd.process_with_scratch(&mut col, &mut scratch);
            for (k, c) in col.iter_mut().enumerate() {
                *c *= f(k) * norm;
            }
            self.inv.process_with_scratch(&mut col, &mut scratch);
            for i in 0..nz {
                values[i * nr + j] = col[i];
            }
        }
    }
}

/// Replace `values` by `-i d/dz values` (spectral).
pub(crate) fn apply_pz(values: &mut [C64], grid: &GridSpec2D) {
    let k = fft_wavenumbers(grid.nz(), grid.dz);
    ColumnFft::new(grid.nz(), grid.nr()).filter(values, |b| C64::new(k[b], 0.0));
}

//! Reduced 1D density matrix, its Wigner function, momentum moments, the
//! quantum (flow) momentum `q = P1/P0` and the probability current.
//!
//! Conventions: `rho(z, z') = 2 pi sum_j psi*(z, rho_j) psi(z', rho_j) rho_j drho`
//! and `W(z, p) = (1/pi) int rho(z + s, z - s) exp(2 i p s) ds`, evaluated on
//! the antidiagonals `s = m dz` that fit inside the grid.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::UniformAxis;
use crate::tdse::Wavefunction2D;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity1D {
    pub z: UniformAxis,
    /// Row-major `values[a * nz + b] = rho(z_a, z_b)`.
    pub values: Vec<C64>,
    pub t: f64,
}

impl ReducedDensity1D {
    /// Integrate the cylindrical state over the azimuth and `rho`.
    pub fn reduce(psi: &Wavefunction2D) -> Self {
        let g = &psi.grid;
        let (nz, nr) = (g.nz(), g.nr());
        let w: Vec<f64> = (0..nr).map(|j| 2.0 * PI * g.rho(j) * g.drho).collect();
        let mut values = vec![C64::new(0.0, 0.0); nz * nz];
        values.par_chunks_mut(nz).enumerate().for_each(|(a, row)| {
            let pa = &psi.values[a * nr..(a + 1) * nr];
            let ca: Vec<C64> = pa.iter().zip(&w).map(|(v, w)| v.conj() * w).collect();
            for b in a..nz {
                let pb = &psi.values[b * nr..(b + 1) * nr];
                let mut s = C64::new(0.0, 0.0);
                for j in 0..nr {
                    s += ca[j] * pb[j];
                }
                row[b] = s;
            }
        });
        // Fill the lower triangle from the upper one so Hermiticity is exact.
        for a in 0..nz {
            for b in 0..a {
                values[a * nz + b] = values[b * nz + a].conj();
            }
            values[a * nz + a].im = 0.0;
        }
        Self { z: g.z_axis(), values, t: psi.t }
    }

    /// Pure state `rho(z, z') = psi*(z) psi(z')` of a 1D wavefunction.
    pub fn from_pure(z: UniformAxis, psi: &[C64], t: f64) -> Self {
        let n = z.len;
        assert_eq!(psi.len(), n);
        let mut values = vec![C64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                values[a * n + b] = psi[a].conj() * psi[b];
            }
        }
        Self { z, values, t }
    }

    #[inline]
    pub fn nz(&self) -> usize {
        self.z.len
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.values[a * self.z.len + b]
    }

    /// Position density `rho(z, z)`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nz()).map(|i| self.get(i, i).re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() * self.z.step
    }

    /// `tr(rho^2)` with the grid quadrature.
    pub fn purity(&self) -> f64 {
        let h = self.z.step;
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        let n = self.nz();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }
}

/// Length of the full-band momentum grid: the smallest odd number `>= nz`.
pub fn full_band_len(nz: usize) -> usize {
    if nz % 2 == 1 {
        nz
    } else {
        nz + 1
    }
}

/// Full-band momentum axis `p_k = k pi / (dz L)`, `|k| <= (L-1)/2`. With the
/// rectangle rule on this axis the discrete `p` integrals of `W` are exact
/// (the transform over antidiagonals is an ordinary DFT of length `L`).
pub fn full_band_axis(z: &UniformAxis) -> UniformAxis {
    let l = full_band_len(z.len);
    let dp = PI / (z.step * l as f64);
    let half = (l - 1) / 2;
    UniformAxis::new(-(half as f64) * dp, dp, l)
}

/// Largest admissible `|p|` for antidiagonal sampling at spacing `dz`.
pub fn nyquist_bound(dz: f64) -> f64 {
    PI / (2.0 * dz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Exact on the full-band axis.
    Rectangle,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub z: UniformAxis,
    pub p: UniformAxis,
    /// Row-major `values[i * np + k] = W(z_i, p_k)`.
    pub values: Vec<f64>,
    pub t: f64,
    pub quadrature: Quadrature,
    /// Largest `|Im W|` before it was discarded.
    pub max_imag_residue: f64,
}

impl WignerGrid {
    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.p.len + k]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn p_weights(&self) -> Vec<f64> {
        let n = self.p.len;
        let mut w = vec![self.p.step; n];
        if self.quadrature == Quadrature::Trapezoid && n > 1 {
            w[0] *= 0.5;
            w[n - 1] *= 0.5;
        }
        w
    }

    /// `int W dz dp`.
    pub fn total(&self) -> f64 {
        self.momentum_marginal().iter().zip(self.p_weights()).map(|(m, w)| m * w).sum()
    }

    /// `int W dz` at each momentum node.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let np = self.p.len;
        let mut out = vec![0.0; np];
        for row in self.values.chunks_exact(np) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.z.step);
        out
    }
}

/// Antidiagonal samples `rho(i + m, i - m)` and `rho(i - m, i + m)` for
/// `m = 0..=min(i, nz-1-i)`.
fn antidiagonals(rho: &ReducedDensity1D, i: usize) -> (Vec<C64>, Vec<C64>) {
    let n = rho.nz();
    let m_max = i.min(n - 1 - i);
    ((0..=m_max).map(|m| rho.get(i + m, i - m)).collect(), (0..=m_max).map(|m| rho.get(i - m, i + m)).collect())
}

/// Wigner transform on an arbitrary momentum axis by direct summation.
pub fn wigner(rho: &ReducedDensity1D, p: &UniformAxis) -> Result<WignerGrid> {
    let bound = nyquist_bound(rho.z.step);
    let p_max = p.min.abs().max(p.max().abs());
    if p_max > bound * (1.0 + 1e-12) {
        return Err(Error::Aliasing { p_max, bound });
    }
    let h = rho.z.step;
    let n = rho.nz();
    let np = p.len;
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (fwd, bwd) = antidiagonals(rho, i);
            let mut row = vec![0.0; np];
            let mut imag = 0.0f64;
            for (k, out) in row.iter_mut().enumerate() {
                let rot = C64::from_polar(1.0, 2.0 * p.at(k) * h);
                let mut ph = C64::new(1.0, 0.0);
                let mut s = fwd[0];
                for (a, b) in fwd[1..].iter().zip(&bwd[1..]) {
                    ph *= rot;
                    s += a * ph + b * ph.conj();
                }
                *out = s.re * h / PI;
                imag = imag.max(s.im.abs() * h / PI);
            }
            (row, imag)
        })
        .collect();
    assemble(rho, *p, rows, Quadrature::Trapezoid)
}

fn assemble(rho: &ReducedDensity1D, p: UniformAxis, rows: Vec<(Vec<f64>, f64)>, quadrature: Quadrature) -> Result<WignerGrid> {
    let mut values = Vec::with_capacity(rho.nz() * p.len);
    let mut max_imag_residue = 0.0f64;
    for (r, im) in rows {
        values.extend_from_slice(&r);
        max_imag_residue = max_imag_residue.max(im);
    }
    Ok(WignerGrid { z: rho.z, p, values, t: rho.t, quadrature, max_imag_residue })
}

/// Wigner transform on [`full_band_axis`] by FFT. The imaginary residue is
/// computed from the full two-sided antidiagonal sum, so it measures the
/// Hermiticity of `rho`.
pub fn wigner_full_band(rho: &ReducedDensity1D) -> WignerGrid {
    let p = full_band_axis(&rho.z);
    let l = p.len;
    let half = (l - 1) / 2;
    let h = rho.z.step;
    let n = rho.nz();
    let fft = FftPlanner::new().plan_fft_inverse(l);
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let m_max = i.min(n - 1 - i);
            let mut buf = vec![C64::new(0.0, 0.0); l];
            for m in 0..=m_max {
                buf[m] = rho.get(i + m, i - m);
                if m > 0 {
                    buf[l - m] = rho.get(i - m, i + m);
                }
            }
            // Inverse DFT: sum_m a_m exp(+2 pi i k m / L) = sum_m a_m exp(2 i p_k m h).
            fft.process(&mut buf);
            let mut row = vec![0.0; l];
            let mut imag = 0.0f64;
            for (k, out) in row.iter_mut().enumerate() {
                // Axis index k corresponds to signed index k - half.
                let idx = (k + l - half) % l;
                let v = buf[idx] * (h / PI);
                *out = v.re;
                imag = imag.max(v.im.abs());
            }
            (row, imag)
        })
        .collect();
    // Rows computed with an infallible path.
    assemble(rho, p, rows, Quadrature::Rectangle).expect("assemble")
}

/// `P_n(z) = int p^n W(z, p) dp` for `n` in `{0, 1, 2}`.
pub fn moments(w: &WignerGrid, n: u32) -> Result<Vec<f64>> {
    if n > 2 {
        return Err(Error::InvalidParameter { name: "n", reason: "moment order must be 0, 1 or 2".into() });
    }
    let pw = w.p_weights();
    let np = w.p.len;
    let factor: Vec<f64> = (0..np).map(|k| w.p.at(k).powi(n as i32) * pw[k]).collect();
    Ok(w.values.chunks_exact(np).map(|row| row.iter().zip(&factor).map(|(a, b)| a * b).sum()).collect())
}

/// Flow momentum `q = P1/P0` on the nodes where `P0` exceeds the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumMomentumCurve {
    pub z: UniformAxis,
    pub q: Vec<f64>,
    pub mask: Vec<bool>,
    pub p0: Vec<f64>,
    pub t: f64,
}

/// Default density floor relative to the peak of `P0`.
pub const DEFAULT_FLOOR: f64 = 1e-8;

impl QuantumMomentumCurve {
    /// Build from the first two moments; `relative_floor` is a fraction of
    /// `max P0`.
    pub fn from_moments(z: UniformAxis, p0: Vec<f64>, p1: &[f64], t: f64, relative_floor: f64) -> Self {
        let peak = p0.iter().copied().fold(0.0, f64::max);
        let floor = relative_floor * peak;
        let mask: Vec<bool> = p0.iter().map(|&d| d >= floor && d > 0.0).collect();
        let q = p0.iter().zip(p1).zip(&mask).map(|((d, j), &m)| if m { j / d } else { 0.0 }).collect();
        Self { z, q, mask, p0, t }
    }

    /// Linear interpolation; both bracketing nodes must be on the mask.
    pub fn value_at(&self, z: f64) -> Result<f64> {
        let x = self.z.position(z);
        let n = self.z.len;
        if !(x >= 0.0 && x <= (n - 1) as f64) {
            return Err(Error::MaskedQuantumMomentum { z, t: self.t });
        }
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        if !(self.mask[i] && self.mask[i + 1]) {
            return Err(Error::MaskedQuantumMomentum { z, t: self.t });
        }
        Ok(self.q[i] * (1.0 - f) + self.q[i + 1] * f)
    }
}

pub fn quantum_momentum(w: &WignerGrid, relative_floor: f64) -> Result<QuantumMomentumCurve> {
    let p0 = moments(w, 0)?;
    let p1 = moments(w, 1)?;
    Ok(QuantumMomentumCurve::from_moments(w.z, p0, &p1, w.t, relative_floor))
}

/// Probability current `j(z) = Im d/dz' rho(z, z')|_{z'=z}` with the
/// band-limited derivative of the antidiagonal samples. It coincides with
/// `P1` of [`wigner_full_band`], term by term.
pub fn current(rho: &ReducedDensity1D) -> Vec<f64> {
    let n = rho.nz();
    let l = full_band_len(n) as f64;
    let pref = PI / (rho.z.step * l);
    (0..n)
        .map(|i| {
            let m_max = i.min(n - 1 - i);
            let mut s = 0.0;
            for m in 1..=m_max {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * rho.get(i + m, i - m).im / (PI * m as f64 / l).sin();
            }
            pref * s
        })
        .collect()
}

/// `j / P0` on the density mask.
pub fn current_momentum(rho: &ReducedDensity1D, relative_floor: f64) -> QuantumMomentumCurve {
    let j = current(rho);
    QuantumMomentumCurve::from_moments(rho.z, rho.diagonal(), &j, rho.t, relative_floor)
}

/// Time-ordered set of flow-momentum snapshots with linear interpolation in
/// time and space.
#[derive(Debug, Clone, Default)]
pub struct QuantumMomentumSeries {
    curves: Vec<QuantumMomentumCurve>,
}

impl QuantumMomentumSeries {
    pub fn new(mut curves: Vec<QuantumMomentumCurve>) -> Self {
        curves.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { curves }
    }

    pub fn curves(&self) -> &[QuantumMomentumCurve] {
        &self.curves
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Snapshot taken within `tol` of `t`.
    pub fn at_time(&self, t: f64, tol: f64) -> Option<&QuantumMomentumCurve> {
        self.curves.iter().find(|c| (c.t - t).abs() <= tol)
    }

    pub fn value_at(&self, z: f64, t: f64) -> Result<f64> {
        let c = &self.curves;
        if c.is_empty() || t < c[0].t - 1e-9 || t > c[c.len() - 1].t + 1e-9 {
            return Err(Error::NoSnapshot { t });
        }
        let k = c.partition_point(|s| s.t <= t);
        if k == 0 {
            return c[0].value_at(z);
        }
        let a = &c[k - 1];
        if k == c.len() || (a.t - t).abs() <= 1e-9 {
            return a.value_at(z);
        }
        let b = &c[k];
        let f = (t - a.t) / (b.t - a.t);
        Ok(a.value_at(z)? * (1.0 - f) + b.value_at(z)? * f)
    }
}

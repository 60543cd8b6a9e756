//! One-dimensional soft-core companion model: instantaneous eigenbasis,
//! energy distribution and the split of the state into below-barrier (FT),
//! above-barrier (OB) and narrow-window (ST) packets with their currents.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::UniformAxis;
use crate::linalg::symmetric_eigen;
use crate::model::{barrier_geometry, PulseParams};
use crate::tdse::{fft_wavenumbers, Absorber};
use crate::tridiag::solve_in_place;

/// `V(z, t) = -1/sqrt(z^2 + a^2) + E(t) z` on a box with hard walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftCore1DModel {
    pub softening: f64,
    pub z: UniformAxis,
    pub pulse: PulseParams,
}

impl SoftCore1DModel {
    /// `z` in `[-150, 150]` with `dz = 0.25`.
    pub fn default_axis() -> UniformAxis {
        UniformAxis::new(-150.0, 0.25, 1201)
    }

    pub fn potential(&self, t: f64) -> Vec<f64> {
        let f = self.pulse.field_at(t);
        let a2 = self.softening * self.softening;
        self.z.values().iter().map(|&z| -1.0 / (z * z + a2).sqrt() + f * z).collect()
    }

    /// Dense `H(t)` row-major: Numerov kinetic operator plus diagonal potential.
    pub fn hamiltonian_dense(&self, t: f64) -> Vec<f64> {
        let n = self.z.len;
        let mut h = numerov_kinetic_dense(n, self.z.step);
        for (i, v) in self.potential(t).into_iter().enumerate() {
            h[i * n + i] += v;
        }
        h
    }

    /// `<psi|H(t)|psi>` via tridiagonal solves, independent of the dense matrix.
    pub fn energy_direct(&self, psi: &[C64], t: f64) -> f64 {
        let hpsi = apply_h(self, psi, t);
        let num: C64 = psi.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
        num.re / psi.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }
}

/// `-1/2 M^-1 L` with Dirichlet walls, assembled from its sine-basis
/// diagonalization: `K_ij = c(i - j) - c(i + j + 2)` with
/// `c(m) = 1/(n+1) sum_k kappa_k cos(m k pi / (n+1))`.
pub fn numerov_kinetic_dense(n: usize, h: f64) -> Vec<f64> {
    let np1 = (n + 1) as f64;
    let kappa: Vec<f64> = (1..=n)
        .map(|k| {
            let c = (k as f64 * PI / np1).cos();
            let lam = (2.0 * c - 2.0) / (h * h);
            let mu = (10.0 + 2.0 * c) / 12.0;
            -0.5 * lam / mu
        })
        .collect();
    let cm: Vec<f64> = (0..=2 * n + 2)
        .map(|m| {
            let s: f64 = kappa.iter().enumerate().map(|(k, kk)| kk * ((m * (k + 1)) as f64 * PI / np1).cos()).sum();
            s / np1
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // Sine-basis index runs 1..=n, so the Hankel argument is i + j + 2.
            out[i * n + j] = cm[i.abs_diff(j)] - cm[i + j + 2];
        }
    }
    out
}

fn apply_h(model: &SoftCore1DModel, psi: &[C64], t: f64) -> Vec<C64> {
    let n = psi.len();
    let h2 = 1.0 / (model.z.step * model.z.step);
    let mut out: Vec<C64> = (0..n)
        .map(|i| {
            let lo = if i > 0 { psi[i - 1] } else { C64::new(0.0, 0.0) };
            let up = if i + 1 < n { psi[i + 1] } else { C64::new(0.0, 0.0) };
            (lo + up - 2.0 * psi[i]) * (-0.5 * h2)
        })
        .collect();
    let l = vec![C64::new(1.0 / 12.0, 0.0); n];
    let d = vec![C64::new(10.0 / 12.0, 0.0); n];
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    solve_in_place(&l, &d, &l, &mut out, &mut scratch);
    for ((o, v), p) in out.iter_mut().zip(model.potential(t)).zip(psi) {
        *o += v * p;
    }
    out
}

/// Lowest eigenpair of the field-free model by shifted inverse iteration on
/// `(-L/2 + M V) x = E M x`.
pub fn ground_state_1d(model: &SoftCore1DModel) -> Result<(Vec<C64>, f64)> {
    let n = model.z.len;
    let h2 = 1.0 / (model.z.step * model.z.step);
    let v = model.potential(-1.0);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    // Any shift below the ground level converges to it; the potential
    // minimum is one.
    let shift = vmin;
    let (mo, md) = (1.0 / 12.0, 10.0 / 12.0);
    let lower: Vec<C64> = (0..n).map(|i| C64::new(-0.5 * h2 + mo * (if i > 0 { v[i - 1] } else { 0.0 } - shift), 0.0)).collect();
    let upper: Vec<C64> = (0..n).map(|i| C64::new(-0.5 * h2 + mo * (if i + 1 < n { v[i + 1] } else { 0.0 } - shift), 0.0)).collect();
    let diag: Vec<C64> = (0..n).map(|i| C64::new(h2 + md * (v[i] - shift), 0.0)).collect();
    let mass = |x: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|i| {
                let mut s = md * x[i];
                if i > 0 {
                    s += mo * x[i - 1];
                }
                if i + 1 < n {
                    s += mo * x[i + 1];
                }
                s
            })
            .collect()
    };
    let mut x: Vec<C64> = model.z.values().iter().map(|&z| C64::new((-z.abs()).exp(), 0.0)).collect();
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    let mut e_prev = f64::INFINITY;
    for it in 0..500 {
        let mut y = mass(&x);
        solve_in_place(&lower, &diag, &upper, &mut y, &mut scratch);
        let nrm = (y.iter().map(|a| a.norm_sqr()).sum::<f64>() * model.z.step).sqrt();
        y.iter_mut().for_each(|a| *a /= nrm);
        x = y;
        let e = model.energy_direct(&x, -1.0);
        if (e - e_prev).abs() < 1e-14 && it > 3 {
            return Ok((x, e));
        }
        e_prev = e;
    }
    Err(Error::NonConvergence { iterations: 500, rate: f64::NAN })
}

/// Bisection on the softening so the field-free ground energy equals
/// `target` within `tol`.
pub fn calibrate_softening(z: UniformAxis, pulse: PulseParams, target: f64, tol: f64) -> Result<SoftCore1DModel> {
    let energy = |a: f64| ground_state_1d(&SoftCore1DModel { softening: a, z, pulse }).map(|(_, e)| e);
    let (mut lo, mut hi) = (0.5, 3.0);
    let (mut elo, ehi) = (energy(lo)?, energy(hi)?);
    if !((elo - target) * (ehi - target) < 0.0) {
        return Err(Error::InvalidParameter { name: "softening", reason: format!("target {target} not bracketed by [{elo}, {ehi}]") });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let em = energy(mid)?;
        if (em - target).abs() <= tol {
            return Ok(SoftCore1DModel { softening: mid, z, pulse });
        }
        if (em - target) * (elo - target) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            elo = em;
        }
    }
    Err(Error::NonConvergence { iterations: 100, rate: f64::NAN })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run1DConfig {
    pub dt: f64,
    pub absorber: Option<Absorber>,
}

impl Default for Run1DConfig {
    fn default() -> Self {
        Self { dt: 0.02, absorber: Some(Absorber::default()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State1D {
    pub t: f64,
    pub psi: Vec<C64>,
}

fn absorber_1d(z: &UniformAxis, a: &Absorber) -> Vec<f64> {
    z.values()
        .iter()
        .map(|&x| {
            let edge = if x >= 0.0 { z.max() } else { z.min };
            let width = a.width_fraction * edge.abs();
            a.ramp((x.abs() - (edge.abs() - width)) / width)
        })
        .collect()
}

/// Crank-Nicolson step of the Numerov Hamiltonian: solve
/// `(M + c B) x = (M - c B) psi` with `B = -L/2 + M (V - i W)`.
fn cn_step(psi: &mut [C64], v: &[f64], w: &[f64], h: f64, c: C64, scratch: &mut [C64]) {
    let n = psi.len();
    let h2 = 1.0 / (h * h);
    let (mo, md) = (1.0 / 12.0, 10.0 / 12.0);
    let d: Vec<C64> = v.iter().zip(w).map(|(v, w)| C64::new(*v, -*w)).collect();
    let zero = C64::new(0.0, 0.0);
    let mut lower = vec![zero; n];
    let mut upper = vec![zero; n];
    let mut diag = vec![zero; n];
    let mut rhs = vec![zero; n];
    for i in 0..n {
        let b_lo = if i > 0 { -0.5 * h2 + mo * d[i - 1] } else { zero };
        let b_up = if i + 1 < n { -0.5 * h2 + mo * d[i + 1] } else { zero };
        let b_d = h2 + md * d[i];
        lower[i] = mo + c * b_lo;
        upper[i] = mo + c * b_up;
        diag[i] = md + c * b_d;
        let mut r = (md - c * b_d) * psi[i];
        if i > 0 {
            r += (mo - c * b_lo) * psi[i - 1];
        }
        if i + 1 < n {
            r += (mo - c * b_up) * psi[i + 1];
        }
        rhs[i] = r;
    }
    solve_in_place(&lower, &diag, &upper, &mut rhs, scratch);
    psi.copy_from_slice(&rhs);
}

/// Propagate from `psi.t` to `t_to`, delivering states at the step nearest
/// to each requested time.
pub fn propagate_1d(model: &SoftCore1DModel, cfg: &Run1DConfig, mut psi: State1D, t_to: f64, snapshot_times: &[f64]) -> Result<(State1D, Vec<State1D>)> {
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter { name: "spectral1d.dt", reason: "must be > 0".into() });
    }
    let span = t_to - psi.t;
    if span == 0.0 {
        return Err(Error::InvalidParameter { name: "t_to", reason: "must differ from the start time".into() });
    }
    let n = ((span.abs() / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let tau = span / n as f64;
    let t0 = psi.t;
    let w = match &cfg.absorber {
        Some(a) => absorber_1d(&model.z, a),
        None => vec![0.0; model.z.len],
    };
    let mut marks: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| ((t - t0) / tau).round())
        .filter(|k| *k >= 0.0 && *k <= n as f64)
        .map(|k| k as usize)
        .collect();
    marks.sort_unstable();
    marks.dedup();
    let mut out = Vec::with_capacity(marks.len());
    let mut mi = 0;
    let mut scratch = vec![C64::new(0.0, 0.0); model.z.len];
    let c = C64::new(0.0, 0.5 * tau);
    for k in 0..=n {
        if k > 0 {
            let tm = t0 + (k as f64 - 0.5) * tau;
            let f = model.pulse.field_at(tm);
            let a2 = model.softening * model.softening;
            let v: Vec<f64> = model.z.values().iter().map(|&z| -1.0 / (z * z + a2).sqrt() + f * z).collect();
            cn_step(&mut psi.psi, &v, &w, model.z.step, c, &mut scratch);
            psi.t = if k == n { t_to } else { t0 + k as f64 * tau };
        }
        while mi < marks.len() && marks[mi] == k {
            out.push(psi.clone());
            mi += 1;
        }
    }
    Ok((psi, out))
}

/// Ground state at `t = 0` propagated through the pulse.
pub fn run_1d_companion(model: &SoftCore1DModel, cfg: &Run1DConfig, snapshot_times: &[f64]) -> Result<Vec<State1D>> {
    let (psi, _) = ground_state_1d(model)?;
    let (_, snaps) = propagate_1d(model, cfg, State1D { t: 0.0, psi }, model.pulse.duration(), snapshot_times)?;
    Ok(snaps)
}

#[derive(Debug, Clone)]
pub struct InstantSpectrum {
    pub t: f64,
    pub field: f64,
    pub energies: Vec<f64>,
    /// `vectors[i * n + k]`: component `i` of eigenvector `k`, normalized as
    /// `sum_i |phi_k(z_i)|^2 dz = 1`.
    pub vectors: Vec<f64>,
    /// Barrier top from the analytic geometry; `None` when the field vanishes.
    pub v_top: Option<f64>,
    pub dz: f64,
}

impl InstantSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn above_barrier(&self) -> Vec<bool> {
        match self.v_top {
            Some(v) => self.energies.iter().map(|&e| e >= v).collect(),
            None => vec![true; self.len()],
        }
    }

    /// Expansion coefficients `<phi_k|psi>`.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mut c = vec![C64::new(0.0, 0.0); n];
        for (i, p) in psi.iter().enumerate() {
            let row = &self.vectors[i * n..(i + 1) * n];
            for (ck, v) in c.iter_mut().zip(row) {
                *ck += *p * *v;
            }
        }
        c.iter_mut().for_each(|x| *x *= self.dz);
        c
    }

    /// `sum_{k in set} c_k phi_k`.
    pub fn synthesize(&self, coeff: &[C64], keep: impl Fn(usize) -> bool) -> Vec<C64> {
        self.synthesize_weighted(coeff, |k| if keep(k) { 1.0 } else { 0.0 })
    }

    /// `sum_k f_k c_k phi_k`.
    pub fn synthesize_weighted(&self, coeff: &[C64], weight: impl Fn(usize) -> f64) -> Vec<C64> {
        let n = self.len();
        let kept: Vec<(usize, C64)> = (0..n).map(|k| (k, weight(k))).filter(|&(_, f)| f != 0.0).map(|(k, f)| (k, coeff[k] * f)).collect();
        (0..n)
            .map(|i| {
                let row = &self.vectors[i * n..(i + 1) * n];
                kept.iter().map(|&(k, c)| c * row[k]).sum()
            })
            .collect()
    }
}

/// Full diagonalization of `H(t)` on the box.
pub fn instantaneous_spectrum(model: &SoftCore1DModel, t: f64) -> Result<InstantSpectrum> {
    let n = model.z.len;
    let (energies, mut vectors) = symmetric_eigen(n, &model.hamiltonian_dense(t))?;
    let s = 1.0 / model.z.step.sqrt();
    vectors.iter_mut().for_each(|v| *v *= s);
    let field = model.pulse.field_at(t);
    let v_top = if field != 0.0 { Some(barrier_geometry(t, 0.0, &model.pulse)?.v_top) } else { None };
    Ok(InstantSpectrum { t, field, energies, vectors, v_top, dz: model.z.step })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDistribution {
    pub t: f64,
    pub energies: Vec<f64>,
    pub populations: Vec<f64>,
    /// `|c_k|^2 w_k` with level-spacing weights `w_k = 2/(E_{k+1} - E_{k-1})`.
    pub density: Vec<f64>,
    pub mean: f64,
    pub spread: f64,
    pub norm: f64,
    pub v_top: Option<f64>,
}

impl EnergyDistribution {
    /// `sum density_k / w_k`, i.e. the integral of the density.
    pub fn integral(&self) -> f64 {
        self.density.iter().zip(level_widths(&self.energies)).map(|(d, w)| d * w).sum()
    }
}

/// Widths `1/w_k` of the levels: half the distance between neighbours, one
/// sided at the ends.
fn level_widths(e: &[f64]) -> Vec<f64> {
    let n = e.len();
    (0..n)
        .map(|k| match (k, n) {
            (_, 1) => 1.0,
            (0, _) => e[1] - e[0],
            (k, n) if k == n - 1 => e[k] - e[k - 1],
            (k, _) => 0.5 * (e[k + 1] - e[k - 1]),
        })
        .collect()
}

/// Fraction of each level's cell (bounded by the midpoints to its
/// neighbours) lying inside `[lo, hi]`. Where levels are denser than the
/// window this is the sharp projector up to the two edge levels; where they
/// are sparser a level contributes in proportion to the window width.
pub fn window_fractions(e: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = e.len();
    (0..n)
        .map(|k| {
            let a = if k > 0 { 0.5 * (e[k - 1] + e[k]) } else if n > 1 { e[0] - 0.5 * (e[1] - e[0]) } else { e[0] - 0.5 };
            let b = if k + 1 < n { 0.5 * (e[k] + e[k + 1]) } else if n > 1 { e[k] + 0.5 * (e[k] - e[k - 1]) } else { e[0] + 0.5 };
            let overlap = (b.min(hi) - a.max(lo)).max(0.0);
            if b > a { overlap / (b - a) } else { 0.0 }
        })
        .collect()
}

pub fn energy_distribution(spec: &InstantSpectrum, psi: &[C64]) -> EnergyDistribution {
    let c = spec.coefficients(psi);
    let populations: Vec<f64> = c.iter().map(|x| x.norm_sqr()).collect();
    let norm: f64 = populations.iter().sum();
    let mean = populations.iter().zip(&spec.energies).map(|(p, e)| p * e).sum::<f64>() / norm;
    let var = populations.iter().zip(&spec.energies).map(|(p, e)| p * (e - mean).powi(2)).sum::<f64>() / norm;
    let density = populations.iter().zip(level_widths(&spec.energies)).map(|(p, w)| p / w).collect();
    EnergyDistribution {
        t: spec.t,
        energies: spec.energies.clone(),
        populations,
        density,
        mean,
        spread: var.sqrt(),
        norm,
        v_top: spec.v_top,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketDecomposition {
    pub ft: Vec<C64>,
    pub ob: Vec<C64>,
    pub st: Vec<C64>,
    /// Mean energy the ST window is centred on.
    pub mean_energy: f64,
    /// Number of levels whose cell overlaps the ST window.
    pub st_levels: usize,
    /// `sum_k f_k` over the ST window; about `st_width` times the local
    /// density of levels.
    pub st_weight: f64,
}

pub const DEFAULT_ST_WIDTH: f64 = 0.004;

pub fn decompose_packets(spec: &InstantSpectrum, psi: &[C64], st_width: f64) -> Result<PacketDecomposition> {
    let v_top = spec.v_top.ok_or(Error::NoBarrier { t: spec.t })?;
    let c = spec.coefficients(psi);
    let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    let mean = c.iter().zip(&spec.energies).map(|(x, e)| x.norm_sqr() * e).sum::<f64>() / norm;
    let e = &spec.energies;
    let f = window_fractions(e, mean - 0.5 * st_width, mean + 0.5 * st_width);
    let ft = spec.synthesize(&c, |k| e[k] < v_top);
    let ob = spec.synthesize(&c, |k| e[k] >= v_top);
    let st = spec.synthesize_weighted(&c, |k| f[k]);
    let st_levels = f.iter().filter(|&&x| x > 0.0).count();
    Ok(PacketDecomposition { ft, ob, st, mean_energy: mean, st_levels, st_weight: f.iter().sum() })
}

/// Spectral derivative along `z`.
fn derivative(psi: &[C64], h: f64) -> Vec<C64> {
    let n = psi.len();
    let mut planner = FftPlanner::new();
    let (f, b) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let k = fft_wavenumbers(n, h);
    let mut buf = psi.to_vec();
    f.process(&mut buf);
    for (x, kk) in buf.iter_mut().zip(&k) {
        *x *= C64::new(0.0, *kk / n as f64);
    }
    b.process(&mut buf);
    buf
}

/// `Im(a* d/dz b)`.
fn bilinear_current(a: &[C64], db: &[C64]) -> Vec<f64> {
    a.iter().zip(db).map(|(x, y)| (x.conj() * y).im).collect()
}

/// Spatial window `[0, 2 z_exit]` (ordered) on the downfield side, with the
/// tunnel exit taken at `energy`. Above the barrier top the exit has merged
/// with the top, so `z_top` is used.
pub fn exit_window(pulse: &PulseParams, t: f64, energy: f64) -> Result<(f64, f64)> {
    let geo = barrier_geometry(t, energy, pulse)?;
    let exit = geo.z_exit().unwrap_or(geo.z_top);
    Ok((0.0f64.min(2.0 * exit), 0.0f64.max(2.0 * exit)))
}

/// Largest `|j|` of `j` over the nodes of `z` inside `window`.
pub fn max_abs_in(z: &UniformAxis, j: &[f64], window: (f64, f64)) -> f64 {
    (0..z.len).filter(|&i| z.at(i) >= window.0 && z.at(i) <= window.1).map(|i| j[i].abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketCurrents {
    pub j_ft: Vec<f64>,
    pub j_ob: Vec<f64>,
    pub j_st: Vec<f64>,
    pub j: Vec<f64>,
    /// Interference term, so that `j = j_ft + j_ob + cross`.
    pub cross: Vec<f64>,
}

pub fn packet_currents(ft: &[C64], ob: &[C64], st: &[C64], psi: &[C64], h: f64) -> PacketCurrents {
    let (dft, dob, dst, dpsi) = (derivative(ft, h), derivative(ob, h), derivative(st, h), derivative(psi, h));
    let c1 = bilinear_current(ft, &dob);
    let c2 = bilinear_current(ob, &dft);
    PacketCurrents {
        j_ft: bilinear_current(ft, &dft),
        j_ob: bilinear_current(ob, &dob),
        j_st: bilinear_current(st, &dst),
        j: bilinear_current(psi, &dpsi),
        cross: c1.iter().zip(&c2).map(|(a, b)| a + b).collect(),
    }
}

//! Split-step Crank-Nicolson propagation.
//!
//! One step of length `tau` is `Z(tau/2) R(tau) Z(tau/2)`, each factor the
//! Cayley form `(1 + c A)^-1 (1 - c A)` of one directional piece of `H`:
//! `A_z = -1/2 M^-1 L_z + V_c/2 + E(t_mid) z - i W_z` and
//! `A_rho = -1/2 L_rho + V_c/2 - i W_rho`. The field is evaluated at the step
//! midpoint, so a step with `-tau` is the exact inverse of the step with `tau`
//! when the absorber is off.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::hamiltonian::{Absorber, Hamiltonian2D};
use super::wavefunction::{norm_sqr_raw, Wavefunction2D};
use crate::error::{Error, Result};
use crate::grid::GridSpec2D;
use crate::model::PulseParams;

/// Discretization family. Only one is implemented; the marker is recorded in
/// run metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Strang splitting, Numerov along `z`, flux form along `rho`.
    #[default]
    StrangNumerovCn,
}

impl Scheme {
    pub fn time_order(&self) -> u32 {
        2
    }
    pub fn z_order(&self) -> u32 {
        4
    }
    pub fn rho_order(&self) -> u32 {
        2
    }
    pub fn name(&self) -> &'static str {
        "strang-numerov-cn"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub absorber: Option<Absorber>,
    pub imaginary_time: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { dt: 0.04, scheme: Scheme::default(), absorber: Some(Absorber::default()), imaginary_time: false }
    }
}

impl PropagatorConfig {
    pub fn validate(&self, grid: &GridSpec2D) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be > 0".into() });
        }
        if let Some(a) = &self.absorber {
            a.validate(grid)?;
        }
        Ok(())
    }
}

/// Columns per block in the `z` sweep.
const Z_BLOCK: usize = 16;

#[derive(Clone, Copy)]
struct SendPtr(*mut C64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

/// Stepper for a fixed signed step `tau`.
#[derive(Debug, Clone)]
pub struct Propagator {
    ham: Hamiltonian2D,
    tau: f64,
    /// Cayley coefficient of the `z` half steps.
    cz: C64,
    /// Cayley coefficient of the `rho` step and its pre-factorization:
    /// sub-diagonal per column, `1/beta` and `gamma` per node.
    cr: C64,
    r_lower: Vec<C64>,
    r_upper: Vec<C64>,
    r_inv_beta: Vec<C64>,
    r_gamma: Vec<C64>,
}

impl Propagator {
    /// `tau` may be negative for backward propagation. In imaginary time the
    /// factor approximates `exp(-H tau)`.
    pub fn new(ham: Hamiltonian2D, tau: f64, imaginary_time: bool) -> Self {
        let c = if imaginary_time { C64::new(0.5 * tau, 0.0) } else { C64::new(0.0, 0.5 * tau) };
        let g = ham.grid;
        let (nz, nr) = (g.nz(), g.nr());
        let kin = 1.0 / (g.drho * g.drho);
        let r_lower: Vec<C64> = ham.rho_lower.iter().map(|&l| c * (-0.5 * l)).collect();
        let r_upper: Vec<C64> = ham.rho_upper.iter().map(|&u| c * (-0.5 * u)).collect();
        let mut r_inv_beta = vec![C64::new(0.0, 0.0); nz * nr];
        let mut r_gamma = vec![C64::new(0.0, 0.0); nz * nr];
        for i in 0..nz {
            let base = i * nr;
            for j in 0..nr {
                let d = C64::new(kin + 0.5 * ham.coulomb[base + j], -ham.absorb_rho[j]);
                let diag = 1.0 + c * d;
                let beta = if j == 0 { diag } else { diag - r_lower[j] * r_gamma[base + j - 1] };
                r_inv_beta[base + j] = 1.0 / beta;
                r_gamma[base + j] = r_upper[j] / beta;
            }
        }
        Self { ham, tau, cz: 0.5 * c, cr: c, r_lower, r_upper, r_inv_beta, r_gamma }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian2D {
        &self.ham
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advance `psi` from `t` to `t + tau`.
    pub fn step(&self, psi: &mut [C64], t: f64, pulse: &PulseParams) {
        let field = pulse.field_at(t + 0.5 * self.tau);
        self.z_sweep(psi, field);
        self.rho_sweep(psi);
        self.z_sweep(psi, field);
    }

    /// Field-free step, used by relaxation.
    pub fn step_field_free(&self, psi: &mut [C64]) {
        self.z_sweep(psi, 0.0);
        self.rho_sweep(psi);
        self.z_sweep(psi, 0.0);
    }

    fn rho_sweep(&self, psi: &mut [C64]) {
        let nr = self.ham.grid.nr();
        let c = self.cr;
        let kin = 1.0 / (self.ham.grid.drho * self.ham.grid.drho);
        psi.par_chunks_mut(nr).enumerate().for_each(|(i, row)| {
            let base = i * nr;
            let mut prev = C64::new(0.0, 0.0);
            for j in 0..nr {
                let d = C64::new(kin + 0.5 * self.ham.coulomb[base + j], -self.ham.absorb_rho[j]);
                let cur = row[j];
                // Right-hand side from the original values, then the forward
                // elimination against the already reduced `row[j - 1]`.
                let mut r = (1.0 - c * d) * cur;
                if j + 1 < nr {
                    r -= self.r_upper[j] * row[j + 1];
                }
                if j > 0 {
                    r -= self.r_lower[j] * (prev + row[j - 1]);
                }
                prev = cur;
                row[j] = r * self.r_inv_beta[base + j];
            }
            for j in (0..nr - 1).rev() {
                let next = row[j + 1];
                row[j] -= self.r_gamma[base + j] * next;
            }
        });
    }

    fn z_sweep(&self, psi: &mut [C64], field: f64) {
        let g = &self.ham.grid;
        let (nz, nr) = (g.nz(), g.nr());
        assert_eq!(psi.len(), nz * nr);
        let ptr = SendPtr(psi.as_mut_ptr());
        let blocks = nr.div_ceil(Z_BLOCK);
        (0..blocks).into_par_iter().for_each(|b| {
            let j0 = b * Z_BLOCK;
            let w = Z_BLOCK.min(nr - j0);
            // SAFETY: blocks cover disjoint column ranges of the same
            // allocation, and `psi` is exclusively borrowed for the call.
            unsafe { self.z_sweep_block(ptr, nz, nr, j0, w, field) };
        });
    }

    /// Solve `(M + c B) x = (M - c B) psi` along `z` for columns `j0..j0+w`,
    /// where `B = -L/2 + M D` and `D` is the diagonal potential part of `A_z`.
    unsafe fn z_sweep_block(&self, ptr: SendPtr, nz: usize, nr: usize, j0: usize, w: usize, field: f64) {
        let p = ptr.0;
        let ham = &self.ham;
        let c = self.cz;
        let h2 = 1.0 / (ham.grid.dz * ham.grid.dz);
        let k_off = -0.5 * h2;
        let (m_off, m_diag) = (1.0 / 12.0, 10.0 / 12.0);
        let d_at = |i: usize, s: usize| -> C64 {
            C64::new(0.5 * ham.coulomb[i * nr + j0 + s] + field * ham.z[i], -ham.absorb_z[i])
        };
        let zero = C64::new(0.0, 0.0);
        let mut gamma = vec![zero; nz * w];
        let mut prev_orig = [zero; Z_BLOCK];
        let mut d_prev = [zero; Z_BLOCK];
        let mut d_cur = [zero; Z_BLOCK];
        let mut d_next = [zero; Z_BLOCK];
        for s in 0..w {
            d_cur[s] = d_at(0, s);
        }
        for i in 0..nz {
            let has_next = i + 1 < nz;
            if has_next {
                for s in 0..w {
                    d_next[s] = d_at(i + 1, s);
                }
            }
            let row = p.add(i * nr + j0);
            for s in 0..w {
                let cur = *row.add(s);
                let a = if i > 0 { m_off + c * (k_off + m_off * d_prev[s]) } else { zero };
                let bdiag = m_diag + c * (h2 + m_diag * d_cur[s]);
                let u = if has_next { m_off + c * (k_off + m_off * d_next[s]) } else { zero };
                let mut r = (2.0 * m_diag - bdiag) * cur;
                let mut beta = bdiag;
                if i > 0 {
                    r += (2.0 * m_off - a) * prev_orig[s];
                    let y_prev = *p.add((i - 1) * nr + j0 + s);
                    beta -= a * gamma[(i - 1) * w + s];
                    r -= a * y_prev;
                }
                if has_next {
                    r += (2.0 * m_off - u) * *p.add((i + 1) * nr + j0 + s);
                }
                let inv = 1.0 / beta;
                gamma[i * w + s] = u * inv;
                prev_orig[s] = cur;
                *row.add(s) = r * inv;
            }
            d_prev = d_cur;
            d_cur = d_next;
        }
        for i in (0..nz - 1).rev() {
            for s in 0..w {
                let next = *p.add((i + 1) * nr + j0 + s);
                *p.add(i * nr + j0 + s) -= gamma[i * w + s] * next;
            }
        }
    }
}

/// Propagate `psi` from `psi.t` to `t_to` (backward when `t_to < psi.t`).
///
/// The interval is divided into equal steps no longer than `cfg.dt`. Each
/// requested snapshot time inside the interval is delivered once, at the
/// nearest step; the snapshot's `t` is the actual step time.
pub fn propagate<F>(
    mut psi: Wavefunction2D,
    pulse: &PulseParams,
    cfg: &PropagatorConfig,
    t_to: f64,
    snapshot_times: &[f64],
    mut sink: F,
) -> Result<Wavefunction2D>
where
    F: FnMut(&Wavefunction2D) -> Result<()>,
{
    cfg.validate(&psi.grid)?;
    pulse.validate()?;
    let t_from = psi.t;
    let span = t_to - t_from;
    if span == 0.0 {
        return Err(Error::InvalidParameter { name: "t_to", reason: "must differ from the start time".into() });
    }
    let n = ((span.abs() / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let tau = span / n as f64;
    let ham = Hamiltonian2D::new(psi.grid, cfg.absorber)?;
    let prop = Propagator::new(ham, tau, cfg.imaginary_time);

    let (lo, hi) = if span > 0.0 { (t_from, t_to) } else { (t_to, t_from) };
    let mut marks: Vec<usize> = snapshot_times
        .iter()
        .filter(|&&t| t >= lo - 0.5 * tau.abs() && t <= hi + 0.5 * tau.abs())
        .map(|&t| (((t - t_from) / tau).round().max(0.0) as usize).min(n))
        .collect();
    marks.sort_unstable();
    marks.dedup();
    let mut next_mark = marks.iter().peekable();

    let mut norm = psi.norm_sqr();
    for k in 0..=n {
        if k > 0 {
            let t0 = t_from + (k - 1) as f64 * tau;
            prop.step(&mut psi.values, t0, pulse);
            psi.t = if k == n { t_to } else { t_from + k as f64 * tau };
            let new_norm = norm_sqr_raw(&psi.grid, &psi.values);
            if !cfg.imaginary_time {
                let growth = new_norm / norm - 1.0;
                if !(growth <= 1e-6) {
                    return Err(Error::Instability { t: psi.t, growth });
                }
            }
            norm = new_norm;
        }
        while next_mark.peek() == Some(&&k) {
            sink(&psi)?;
            next_mark.next();
        }
    }
    Ok(psi)
}

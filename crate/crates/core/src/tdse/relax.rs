//! Bound states by imaginary-time relaxation.
//!
//! A block of hydrogenic trial states is repeatedly multiplied by the
//! split-step approximation of `exp(-H dtau)`, re-orthonormalized by weighted
//! Gram-Schmidt and periodically rotated by a Rayleigh-Ritz step in the block.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::hamiltonian::Hamiltonian2D;
use super::propagator::Propagator;
use super::wavefunction::{inner_raw, norm_sqr_raw, Wavefunction2D};
use crate::error::{Error, Result};
use crate::grid::GridSpec2D;
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationConfig {
    pub dtau: f64,
    pub max_steps: usize,
    /// Steps between convergence checks (and Rayleigh-Ritz rotations).
    pub check_every: usize,
    /// Converged once every block energy changes by less than this per unit
    /// imaginary time.
    pub rate_tol: f64,
    /// Minimum imaginary time before convergence is accepted.
    pub min_tau: f64,
    /// Real-time step of the propagator the ground state will be used with.
    /// When set, the relaxed state is projected onto the nearest stationary
    /// state of that propagator by a windowed time average.
    pub polish_dt: Option<f64>,
    /// Length of the averaging window.
    pub polish_time: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            dtau: 0.05,
            max_steps: 40_000,
            check_every: 20,
            rate_tol: 1e-8,
            min_tau: 20.0,
            polish_dt: None,
            polish_time: 50.0,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0) {
            return Err(Error::InvalidParameter { name: "relax.dtau", reason: "must be > 0".into() });
        }
        if self.check_every == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter { name: "relax", reason: "step counts must be positive".into() });
        }
        Ok(())
    }
}

/// Field-free bound state `|n, l, m = 0>`.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub n: u32,
    pub l: u32,
    pub energy: f64,
    /// `||H psi - E psi||`.
    pub residual: f64,
    pub psi: Wavefunction2D,
}

#[derive(Debug, Clone)]
pub struct BoundStateSet {
    pub n_max: u32,
    pub states: Vec<BoundState>,
}

impl BoundStateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Populations `|<n l|psi>|^2` in the order of `states`.
    pub fn populations(&self, psi: &Wavefunction2D) -> Result<Vec<f64>> {
        self.states.iter().map(|s| s.psi.inner(psi).map(|c| c.norm_sqr())).collect()
    }

    pub fn get(&self, n: u32, l: u32) -> Option<&BoundState> {
        self.states.iter().find(|s| s.n == n && s.l == l)
    }
}

/// Radial hydrogen function `R_nl(r)` up to normalization.
pub fn hydrogen_radial(n: u32, l: u32, r: f64) -> f64 {
    let x = 2.0 * r / n as f64;
    let k = n - l - 1;
    let alpha = (2 * l + 1) as f64;
    // Generalized Laguerre L_k^alpha(x) by recurrence.
    let (mut p0, mut p1) = (1.0, 1.0 + alpha - x);
    let lag = if k == 0 {
        p0
    } else {
        for m in 1..k {
            let m = m as f64;
            let p2 = ((2.0 * m + 1.0 + alpha - x) * p1 - (m + alpha) * p0) / (m + 1.0);
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    x.powi(l as i32) * (-0.5 * x).exp() * lag
}

/// Legendre polynomial `P_l(x)`.
pub fn legendre(l: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Normalized analytic hydrogen orbital sampled on the grid.
pub fn hydrogen_orbital(grid: GridSpec2D, n: u32, l: u32) -> Wavefunction2D {
    let mut psi = Wavefunction2D::from_fn(grid, 0.0, |z, rho| {
        let r = (z * z + rho * rho).sqrt();
        C64::new(hydrogen_radial(n, l, r) * legendre(l, z / r), 0.0)
    });
    psi.normalize();
    psi
}

fn labels(n_max: u32) -> Vec<(u32, u32)> {
    (1..=n_max).flat_map(|n| (0..n).map(move |l| (n, l))).collect()
}

/// Modified Gram-Schmidt in the cylindrical inner product.
fn orthonormalize(grid: &GridSpec2D, block: &mut [Vec<C64>]) -> Result<()> {
    for a in 0..block.len() {
        let (done, rest) = block.split_at_mut(a);
        let v = &mut rest[0];
        let before = norm_sqr_raw(grid, v).sqrt();
        for u in done.iter() {
            let c = inner_raw(grid, u, v);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
        let after = norm_sqr_raw(grid, v).sqrt();
        if !(after > 1e-8 * before) {
            return Err(Error::DegeneracyResolution { a, b: a.saturating_sub(1), overlap: 1.0 - after / before });
        }
        let s = 1.0 / after;
        v.iter_mut().for_each(|x| *x *= s);
    }
    Ok(())
}

/// Rotate the block onto Ritz vectors; returns ascending Ritz values.
fn rayleigh_ritz(ham: &Hamiltonian2D, block: &mut [Vec<C64>]) -> Result<Vec<f64>> {
    let k = block.len();
    let g = ham.grid;
    let hv: Vec<Vec<C64>> = block
        .par_iter()
        .map(|v| {
            let mut out = vec![C64::new(0.0, 0.0); v.len()];
            ham.apply(v, 0.0, &mut out);
            out
        })
        .collect();
    let mut h = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            h[a * k + b] = inner_raw(&g, &block[a], &hv[b]).re;
        }
    }
    let (vals, vecs) = symmetric_eigen(k, &h)?;
    let len = block[0].len();
    let mut rotated = vec![vec![C64::new(0.0, 0.0); len]; k];
    for (m, out) in rotated.iter_mut().enumerate() {
        for a in 0..k {
            let c = vecs[a * k + m];
            for (x, y) in out.iter_mut().zip(&block[a]) {
                *x += c * y;
            }
        }
    }
    block.clone_from_slice(&rotated);
    Ok(vals)
}

fn relax_block(ham: &Hamiltonian2D, cfg: &RelaxationConfig, block: &mut [Vec<C64>]) -> Result<Vec<f64>> {
    cfg.validate()?;
    let g = ham.grid;
    let stepper = Propagator::new(ham.clone(), cfg.dtau, true);
    orthonormalize(&g, block)?;
    let mut energies = rayleigh_ritz(ham, block)?;
    let mut rate = f64::INFINITY;
    let mut step = 0;
    while step < cfg.max_steps {
        for _ in 0..cfg.check_every {
            block.iter_mut().for_each(|v| stepper.step_field_free(v));
            orthonormalize(&g, block)?;
            step += 1;
        }
        let e = rayleigh_ritz(ham, block)?;
        let dtau = cfg.check_every as f64 * cfg.dtau;
        rate = e.iter().zip(&energies).map(|(a, b)| (a - b).abs() / dtau).fold(0.0, f64::max);
        energies = e;
        if rate <= cfg.rate_tol && step as f64 * cfg.dtau >= cfg.min_tau {
            orthonormalize(&g, block)?;
            return Ok(energies);
        }
    }
    Err(Error::NonConvergence { iterations: step, rate })
}

fn residual(ham: &Hamiltonian2D, v: &[C64], e: f64) -> f64 {
    let mut hv = vec![C64::new(0.0, 0.0); v.len()];
    ham.apply(v, 0.0, &mut hv);
    for (x, y) in hv.iter_mut().zip(v) {
        *x -= e * y;
    }
    norm_sqr_raw(&ham.grid, &hv).sqrt()
}

/// Field-free ground state and its Rayleigh-quotient energy.
pub fn ground_state(grid: GridSpec2D, cfg: &RelaxationConfig) -> Result<(Wavefunction2D, f64)> {
    let ham = Hamiltonian2D::new(grid, None)?;
    let mut block = vec![hydrogen_orbital(grid, 1, 0).values];
    relax_block(&ham, cfg, &mut block)?;
    let mut psi = Wavefunction2D { grid, values: block.pop().unwrap_or_default(), t: 0.0 };
    if let Some(dt) = cfg.polish_dt {
        psi = stationary_filter(&psi, &ham, dt, cfg.polish_time)?;
    }
    fix_phase(&mut psi);
    let e = ham.energy(&psi.values, 0.0);
    Ok((psi, e))
}

/// `sum_k w_k exp(i omega k dt) U^k psi` with a Hann window `w_k` over
/// `duration`, where `U` is the field-free real-time step and `omega` the
/// eigenphase rate of `psi`. Components of other stationary states are
/// suppressed by the window's spectral leakage at their energy offset.
pub fn stationary_filter(psi: &Wavefunction2D, ham: &Hamiltonian2D, dt: f64, duration: f64) -> Result<Wavefunction2D> {
    if !(dt > 0.0 && duration > dt) {
        return Err(Error::InvalidParameter { name: "relax.polish", reason: "need 0 < dt < duration".into() });
    }
    let prop = Propagator::new(ham.clone(), dt, false);
    let mut u = psi.values.clone();
    prop.step_field_free(&mut u);
    let omega = -inner_raw(&psi.grid, &psi.values, &u).arg() / dt;
    let n = (duration / dt).round() as usize;
    let mut acc = vec![C64::new(0.0, 0.0); u.len()];
    u.copy_from_slice(&psi.values);
    for k in 0..n {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
        let ph = C64::from_polar(w, omega * k as f64 * dt);
        for (a, b) in acc.iter_mut().zip(&u) {
            *a += ph * b;
        }
        prop.step_field_free(&mut u);
    }
    let mut out = Wavefunction2D { grid: psi.grid, values: acc, t: psi.t };
    out.normalize();
    Ok(out)
}

/// Make the largest-magnitude amplitude real and positive.
fn fix_phase(psi: &mut Wavefunction2D) {
    if let Some(m) = psi.values.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())) {
        if m.norm() > 0.0 {
            psi.scale(m.conj() / m.norm());
        }
    }
}

/// All `m = 0` bound states with `n <= n_max`, orthonormal on `grid`.
pub fn bound_states(grid: GridSpec2D, cfg: &RelaxationConfig, n_max: u32) -> Result<BoundStateSet> {
    if n_max < 1 {
        return Err(Error::InvalidParameter { name: "n_max", reason: "must be >= 1".into() });
    }
    let ham = Hamiltonian2D::new(grid, None)?;
    let labels = labels(n_max);
    let guesses: Vec<Wavefunction2D> = labels.iter().map(|&(n, l)| hydrogen_orbital(grid, n, l)).collect();
    let mut block: Vec<Vec<C64>> = guesses.iter().map(|g| g.values.clone()).collect();
    let energies = relax_block(&ham, cfg, &mut block)?;

    // Label each Ritz vector by its largest overlap with an unused trial orbital.
    let k = block.len();
    let mut overlap = vec![0.0; k * k];
    for (m, v) in block.iter().enumerate() {
        for (a, g) in guesses.iter().enumerate() {
            overlap[m * k + a] = inner_raw(&grid, &g.values, v).norm_sqr();
        }
    }
    let mut assigned = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for _ in 0..k {
        let mut best = (0.0, usize::MAX, usize::MAX);
        for m in (0..k).filter(|&m| assigned[m] == usize::MAX) {
            for a in (0..k).filter(|&a| !used[a]) {
                if overlap[m * k + a] >= best.0 {
                    best = (overlap[m * k + a], m, a);
                }
            }
        }
        assigned[best.1] = best.2;
        used[best.2] = true;
    }

    let mut states: Vec<BoundState> = block
        .into_iter()
        .enumerate()
        .map(|(m, values)| {
            let (n, l) = labels[assigned[m]];
            let mut psi = Wavefunction2D { grid, values, t: 0.0 };
            fix_phase(&mut psi);
            let residual = residual(&ham, &psi.values, energies[m]);
            BoundState { n, l, energy: energies[m], residual, psi }
        })
        .collect();
    states.sort_by_key(|s| (s.n, s.l));
    for a in 0..states.len() {
        for b in 0..a {
            let o = states[a].psi.inner(&states[b].psi)?.norm();
            if o > 1e-6 {
                return Err(Error::DegeneracyResolution { a, b, overlap: o });
            }
        }
    }
    Ok(BoundStateSet { n_max, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_functions_have_expected_nodes() {
        // R_20 vanishes at r = 2, R_30 at r = (9 +- 3 sqrt 3)/2.
        assert!(hydrogen_radial(2, 0, 2.0).abs() < 1e-14);
        let r = 0.5 * (9.0 - 3.0 * 3f64.sqrt());
        assert!(hydrogen_radial(3, 0, r).abs() < 1e-14);
        assert!((legendre(2, 0.5) - (-0.125)).abs() < 1e-15);
        assert!((legendre(3, 1.0) - 1.0).abs() < 1e-15);
    }
}

//! Positive-momentum positive-energy (PMPE) packet: the final state with the
//! bound states removed and only `p_z > 0` components kept, its backward
//! propagation and phase-space picture.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::UniformAxis;
use crate::linalg::solve_complex;
use crate::model::{barrier_geometry, PulseParams};
use crate::phase_space::{quantum_momentum, wigner_full_band, QuantumMomentumCurve, ReducedDensity1D, WignerGrid, DEFAULT_FLOOR};
use crate::tdse::{fft_wavenumbers, propagate, BoundStateSet, ColumnFft, PropagatorConfig, Wavefunction2D};

/// Norm removed by one projection of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    pub iteration: usize,
    pub norm_removed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BoundSubtraction,
    MomentumFilter,
    /// Removal of the bound-state overlap the filter reintroduces.
    Intersection,
}

#[derive(Debug, Clone)]
pub struct PmpePacket {
    pub psi: Wavefunction2D,
    pub n_max: u32,
    pub stages: Vec<StageRecord>,
    /// Largest `|<n l|psi>|` after construction.
    pub bound_overlap: f64,
}

impl PmpePacket {
    pub fn norm(&self) -> f64 {
        self.psi.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpeConfig {
    /// Stop once every bound-state overlap is below this.
    pub overlap_tol: f64,
    /// Refinement sweeps of the intersection projection.
    pub max_iterations: usize,
}

impl Default for PmpeConfig {
    fn default() -> Self {
        Self { overlap_tol: 1e-12, max_iterations: 5 }
    }
}

fn subtract_bound(psi: &mut Wavefunction2D, bounds: &BoundStateSet) -> Result<()> {
    for b in &bounds.states {
        let c = b.psi.inner(psi)?;
        psi.axpy(-c, &b.psi)?;
    }
    Ok(())
}

fn max_overlap(psi: &Wavefunction2D, bounds: &BoundStateSet) -> Result<f64> {
    let mut worst = 0.0f64;
    for b in &bounds.states {
        worst = worst.max(b.psi.inner(psi)?.norm());
    }
    Ok(worst)
}

/// Zero every `p_z <= 0` component along `z` at each `rho`.
pub fn positive_momentum_filter(psi: &mut Wavefunction2D) {
    let g = psi.grid;
    let k = fft_wavenumbers(g.nz(), g.dz);
    ColumnFft::new(g.nz(), g.nr()).filter(&mut psi.values, |b| if k[b] > 0.0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
}

/// Subtract the bound states, then filter to `p_z > 0`.
///
/// The filter reintroduces a small bound-state overlap because the two
/// projections do not commute. The packet returned is the projection onto
/// the intersection of both subspaces, `P psi - sum_k a_k P phi_k` with `a`
/// from the Gram system `<P phi_j|P phi_k> a_k = <P phi_j|P psi>`; this is the
/// limit of alternating both projections and is itself idempotent.
pub fn build_pmpe(psi_final: &Wavefunction2D, bounds: &BoundStateSet, cfg: &PmpeConfig) -> Result<PmpePacket> {
    for b in &bounds.states {
        if !b.psi.grid.same_as(&psi_final.grid) {
            return Err(Error::GridMismatch(format!("bound state ({}, {}) lives on a different grid", b.n, b.l)));
        }
    }
    let n0 = psi_final.norm_sqr();
    let mut psi = psi_final.clone();
    subtract_bound(&mut psi, bounds)?;
    let n1 = psi.norm_sqr();
    positive_momentum_filter(&mut psi);
    let n2 = psi.norm_sqr();
    let mut stages = vec![
        StageRecord { stage: Stage::BoundSubtraction, iteration: 0, norm_removed: n0 - n1 },
        StageRecord { stage: Stage::MomentumFilter, iteration: 0, norm_removed: n1 - n2 },
    ];

    // P psi_PE differs from P psi only by P applied to bound states, so the
    // intersection projection of either is the same.
    let filtered: Vec<Wavefunction2D> = bounds
        .states
        .iter()
        .map(|b| {
            let mut f = b.psi.clone();
            positive_momentum_filter(&mut f);
            f
        })
        .collect();
    let k = filtered.len();
    let mut overlap = max_overlap(&psi, bounds)?;
    for it in 1..=cfg.max_iterations {
        if overlap <= cfg.overlap_tol * n0.sqrt().max(1e-300) || k == 0 {
            return Ok(PmpePacket { psi, n_max: bounds.n_max, stages, bound_overlap: overlap });
        }
        let mut gram = vec![C64::new(0.0, 0.0); k * k];
        let mut rhs = vec![C64::new(0.0, 0.0); k];
        for j in 0..k {
            for l in 0..k {
                gram[j * k + l] = filtered[j].inner(&filtered[l])?;
            }
            rhs[j] = bounds.states[j].psi.inner(&psi)?;
        }
        let a = solve_complex(k, &gram, &rhs)?;
        let before = psi.norm_sqr();
        for (f, c) in filtered.iter().zip(&a) {
            psi.axpy(-*c, f)?;
        }
        stages.push(StageRecord { stage: Stage::Intersection, iteration: it, norm_removed: before - psi.norm_sqr() });
        overlap = max_overlap(&psi, bounds)?;
    }
    Err(Error::NonConvergence { iterations: cfg.max_iterations, rate: overlap })
}

/// Largest `|psi(p_z <= 0, rho)|` relative to the largest amplitude overall.
pub fn negative_momentum_residue(psi: &Wavefunction2D) -> f64 {
    let g = psi.grid;
    let (nz, nr) = (g.nz(), g.nr());
    let k = fft_wavenumbers(nz, g.dz);
    let fft = FftPlanner::new().plan_fft_forward(nz);
    let mut col = vec![C64::new(0.0, 0.0); nz];
    let (mut neg, mut peak) = (0.0f64, 0.0f64);
    for j in 0..nr {
        for i in 0..nz {
            col[i] = psi.values[i * nr + j];
        }
        fft.process(&mut col);
        for (b, c) in col.iter().enumerate() {
            let a = c.norm();
            peak = peak.max(a);
            if k[b] <= 0.0 {
                neg = neg.max(a);
            }
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        neg / peak
    }
}

/// Propagate the packet backwards from its time to each requested time.
/// The absorber is always off.
pub fn backpropagate_pmpe(pkt: &PmpePacket, pulse: &PulseParams, cfg: &PropagatorConfig, times: &[f64]) -> Result<Vec<Wavefunction2D>> {
    let cfg = PropagatorConfig { absorber: None, imaginary_time: false, ..*cfg };
    let t0 = pkt.psi.t;
    let earliest = times.iter().copied().fold(t0, f64::min);
    if earliest >= t0 {
        return Err(Error::InvalidParameter { name: "times", reason: "backward propagation needs a time before the packet".into() });
    }
    let mut out = Vec::new();
    propagate(pkt.psi.clone(), pulse, &cfg, earliest, times, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Reduced-state Wigner function (full-band momentum axis) and flow momentum.
pub fn pmpe_wigner(snapshot: &Wavefunction2D) -> Result<(WignerGrid, QuantumMomentumCurve)> {
    let rho = ReducedDensity1D::reduce(snapshot);
    let w = wigner_full_band(&rho);
    let q = quantum_momentum(&w, DEFAULT_FLOOR)?;
    Ok((w, q))
}

/// Phase-space integral of `W` split by the instantaneous separatrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixSplit {
    pub t: f64,
    pub v_top: f64,
    /// `int W` over `p^2/2 + V(z, 0, t) < V_top`.
    pub below: f64,
    /// `int W` over `p^2/2 + V(z, 0, t) >= V_top`.
    pub above: f64,
}

impl SeparatrixSplit {
    pub fn total(&self) -> f64 {
        self.below + self.above
    }
    pub fn below_fraction(&self) -> f64 {
        self.below / self.total()
    }
    pub fn above_fraction(&self) -> f64 {
        self.above / self.total()
    }
}

/// Classify every phase-space cell by its classical energy on the axis.
/// The node `z = 0` counts as below the separatrix.
pub fn separatrix_split(w: &WignerGrid, pulse: &PulseParams) -> Result<SeparatrixSplit> {
    let geo = barrier_geometry(w.t, 0.0, pulse)?;
    let field = geo.field;
    let (mut below, mut above) = (0.0, 0.0);
    let cell = w.z.step * w.p.step;
    for i in 0..w.z.len {
        let z = w.z.at(i);
        let v = if z == 0.0 { f64::NEG_INFINITY } else { -1.0 / z.abs() + field * z };
        for k in 0..w.p.len {
            let p = w.p.at(k);
            let val = w.get(i, k) * cell;
            if 0.5 * p * p + v < geo.v_top {
                below += val;
            } else {
                above += val;
            }
        }
    }
    Ok(SeparatrixSplit { t: w.t, v_top: geo.v_top, below, above })
}

/// `rho`-integrated momentum density `n(p_z)` on the FFT momentum grid, so
/// that `sum n dp = ||psi||^2`. Returned sorted by momentum.
pub fn momentum_distribution(psi: &Wavefunction2D) -> (UniformAxis, Vec<f64>) {
    let g = psi.grid;
    let (nz, nr) = (g.nz(), g.nr());
    let fft = FftPlanner::new().plan_fft_forward(nz);
    let dp = 2.0 * std::f64::consts::PI / (nz as f64 * g.dz);
    let mut dens = vec![0.0; nz];
    let mut col = vec![C64::new(0.0, 0.0); nz];
    // |phi(p)|^2 = dz^2 / (2 pi) |DFT|^2.
    let scale = g.dz * g.dz / (2.0 * std::f64::consts::PI);
    for j in 0..nr {
        for i in 0..nz {
            col[i] = psi.values[i * nr + j];
        }
        fft.process(&mut col);
        let w = 2.0 * std::f64::consts::PI * g.rho(j) * g.drho;
        for (d, c) in dens.iter_mut().zip(&col) {
            *d += w * scale * c.norm_sqr();
        }
    }
    // Reorder bins so momentum ascends; the even-length Nyquist bin, which
    // the operator maps to zero, is placed at the negative end.
    let mut order: Vec<usize> = (0..nz).collect();
    let signed = |b: usize| if 2 * b < nz { b as i64 } else { b as i64 - nz as i64 };
    order.sort_by_key(|&b| signed(b));
    let p_min = signed(order[0]) as f64 * dp;
    (UniformAxis::new(p_min, dp, nz), order.iter().map(|&b| dens[b]).collect())
}

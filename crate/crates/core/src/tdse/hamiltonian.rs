//! Discrete field-free Hamiltonian pieces on the cylindrical grid.
//!
//! Along `z` the kinetic term is the compact fourth-order (Numerov) operator
//! `-1/2 M^-1 L` with `M = tridiag(1, 10, 1)/12`. Along `rho` it is the
//! conservative flux form on half-offset nodes, which makes the operator
//! symmetric under the weight `rho_j` and imposes regularity at the axis.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec2D;
use crate::tridiag::RealTridiagLu;

/// Complex absorbing potential `-i eta (1 - cos^8(pi s / 2))` ramping up over
/// the outer fraction of each boundary (`s = 0` at the ramp start, `1` at the edge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    pub strength: f64,
    pub width_fraction: f64,
}

impl Default for Absorber {
    fn default() -> Self {
        Self { strength: 0.25, width_fraction: 0.1 }
    }
}

impl Absorber {
    #[inline]
    pub fn ramp(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let c = (0.5 * std::f64::consts::PI * s.min(1.0)).cos();
        self.strength * (1.0 - c.powi(8))
    }

    /// Ramp values at the `z` nodes.
    pub fn z_profile(&self, grid: &GridSpec2D) -> Vec<f64> {
        (0..grid.nz())
            .map(|i| {
                let z = grid.z(i);
                let edge = if z >= 0.0 { grid.z_max } else { grid.z_min };
                let width = self.width_fraction * edge.abs();
                self.ramp((z.abs() - (edge.abs() - width)) / width)
            })
            .collect()
    }

    /// Ramp values at the `rho` nodes.
    pub fn rho_profile(&self, grid: &GridSpec2D) -> Vec<f64> {
        let width = self.width_fraction * grid.rho_max;
        (0..grid.nr()).map(|j| self.ramp((grid.rho(j) - (grid.rho_max - width)) / width)).collect()
    }

    pub fn validate(&self, grid: &GridSpec2D) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParameter { name: "absorber", reason });
        if !(self.strength >= 0.0) {
            return bad("strength must be >= 0".into());
        }
        if !(self.width_fraction > 0.0 && self.width_fraction < 0.5) {
            return bad("width fraction must lie in (0, 0.5)".into());
        }
        let nz_pts = self.width_fraction * grid.z_max.min(-grid.z_min) / grid.dz;
        let nr_pts = self.width_fraction * grid.rho_max / grid.drho;
        if nz_pts < 10.0 || nr_pts < 10.0 {
            return bad(format!("ramp spans {nz_pts:.1} z nodes and {nr_pts:.1} rho nodes; at least 10 required"));
        }
        Ok(())
    }
}

/// Antiderivative of `sqrt(z^2 + c^2)` in `z`.
fn g(z: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.5 * z * z.abs()
    } else {
        0.5 * (z * (z * z + c * c).sqrt() + c * c * (z / c).asinh())
    }
}

/// Average of `-1/r` over the cell `[z - dz/2, z + dz/2] x [j drho, (j+1) drho]`
/// with the cylindrical measure `rho drho dz`. Finite on every cell, including
/// the one touching the nucleus.
pub fn cell_coulomb(z: f64, dz: f64, j: usize, drho: f64) -> f64 {
    let (za, zb) = (z - 0.5 * dz, z + 0.5 * dz);
    let (ra, rb) = (j as f64 * drho, (j + 1) as f64 * drho);
    let integral = g(zb, rb) - g(za, rb) - g(zb, ra) + g(za, ra);
    -2.0 * integral / (dz * (rb * rb - ra * ra))
}

/// Static parts of `H(t) = T + V_c + E(t) z - i W`.
#[derive(Debug, Clone)]
pub struct Hamiltonian2D {
    pub grid: GridSpec2D,
    /// Cell-averaged Coulomb potential, row-major.
    pub coulomb: Vec<f64>,
    pub z: Vec<f64>,
    pub absorb_z: Vec<f64>,
    pub absorb_rho: Vec<f64>,
    /// Flux-form radial Laplacian couplings to `j-1` and `j+1`.
    pub rho_lower: Vec<f64>,
    pub rho_upper: Vec<f64>,
    mass: RealTridiagLu,
}

impl Hamiltonian2D {
    pub fn new(grid: GridSpec2D, absorber: Option<Absorber>) -> Result<Self> {
        grid.validate()?;
        if let Some(a) = absorber {
            a.validate(&grid)?;
        }
        let (nz, nr) = (grid.nz(), grid.nr());
        let mut coulomb = Vec::with_capacity(nz * nr);
        for i in 0..nz {
            for j in 0..nr {
                coulomb.push(cell_coulomb(grid.z(i), grid.dz, j, grid.drho));
            }
        }
        let z = (0..nz).map(|i| grid.z(i)).collect();
        let (absorb_z, absorb_rho) = match absorber {
            Some(a) => (a.z_profile(&grid), a.rho_profile(&grid)),
            None => (vec![0.0; nz], vec![0.0; nr]),
        };
        let h2 = grid.drho * grid.drho;
        let mut rho_lower = vec![0.0; nr];
        let mut rho_upper = vec![0.0; nr];
        for j in 0..nr {
            let r = grid.rho(j);
            let (rm, rp) = (r - 0.5 * grid.drho, r + 0.5 * grid.drho);
            rho_lower[j] = if j == 0 { 0.0 } else { rm / (r * h2) };
            rho_upper[j] = if j + 1 == nr { 0.0 } else { rp / (r * h2) };
        }
        let mass = numerov_mass(nz);
        Ok(Self { grid, coulomb, z, absorb_z, absorb_rho, rho_lower, rho_upper, mass })
    }

    pub fn has_absorber(&self) -> bool {
        self.absorb_z.iter().chain(&self.absorb_rho).any(|&w| w != 0.0)
    }

    /// Diagonal entry of the radial Laplacian; `-2/drho^2` on every node.
    #[inline]
    pub fn rho_diag(&self) -> f64 {
        -2.0 / (self.grid.drho * self.grid.drho)
    }

    /// `out = H psi` at field value `field`.
    pub fn apply(&self, psi: &[C64], field: f64, out: &mut [C64]) {
        let g = &self.grid;
        let (nz, nr) = (g.nz(), g.nr());
        let hz2 = 1.0 / (g.dz * g.dz);
        // z kinetic: -1/2 M^-1 L psi, solved for all columns at once.
        for i in 0..nz {
            for j in 0..nr {
                let c = psi[i * nr + j];
                let lo = if i > 0 { psi[(i - 1) * nr + j] } else { C64::new(0.0, 0.0) };
                let up = if i + 1 < nz { psi[(i + 1) * nr + j] } else { C64::new(0.0, 0.0) };
                out[i * nr + j] = (lo + up - 2.0 * c) * (-0.5 * hz2);
            }
        }
        self.mass.solve_strided(out, nr);
        let d = self.rho_diag();
        for i in 0..nz {
            let row = &psi[i * nr..(i + 1) * nr];
            let orow = &mut out[i * nr..(i + 1) * nr];
            let ez = field * self.z[i];
            let wz = self.absorb_z[i];
            for j in 0..nr {
                let mut lap = d * row[j];
                if j > 0 {
                    lap += self.rho_lower[j] * row[j - 1];
                }
                if j + 1 < nr {
                    lap += self.rho_upper[j] * row[j + 1];
                }
                let v = C64::new(self.coulomb[i * nr + j] + ez, -(wz + self.absorb_rho[j]));
                orow[j] += -0.5 * lap + v * row[j];
            }
        }
    }

    /// `<psi|H|psi> / <psi|psi>`.
    pub fn energy(&self, psi: &[C64], field: f64) -> f64 {
        let mut hpsi = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply(psi, field, &mut hpsi);
        let num = super::wavefunction::inner_raw(&self.grid, psi, &hpsi).re;
        num / super::wavefunction::norm_sqr_raw(&self.grid, psi)
    }
}

pub(crate) fn numerov_mass(n: usize) -> RealTridiagLu {
    RealTridiagLu::new(&vec![1.0 / 12.0; n], &vec![10.0 / 12.0; n], &vec![1.0 / 12.0; n])
}

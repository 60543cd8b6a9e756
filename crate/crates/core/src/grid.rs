//! Uniform grids for the cylindrical `(z, rho)` problem.

use crate::error::{Error, Result};

/// Uniformly spaced axis `x_k = min + k step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformAxis {
    pub min: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformAxis {
    pub fn new(min: f64, step: f64, len: usize) -> Self {
        Self { min, step, len }
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.at(self.len.saturating_sub(1))
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }

    /// Fractional index of `x`; not clamped.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x - self.min) / self.step
    }

    pub fn same_as(&self, other: &UniformAxis) -> bool {
        self.len == other.len
            && (self.min - other.min).abs() <= 1e-12 * self.step
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }
}

/// Discretization of the `(z, rho)` half-plane.
///
/// Radial nodes sit at `rho_j = (j + 1/2) drho`, so the axis `rho = 0` is never
/// sampled and the Coulomb potential stays finite on every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec2D {
    pub z_min: f64,
    pub z_max: f64,
    pub dz: f64,
    pub rho_max: f64,
    pub drho: f64,
    pub half_offset: bool,
}

impl GridSpec2D {
    /// z in [-240, 240] with dz = 0.2, rho in (0, 120] with drho = 0.2.
    pub fn production() -> Self {
        Self { z_min: -240.0, z_max: 240.0, dz: 0.2, rho_max: 120.0, drho: 0.2, half_offset: true }
    }

    /// z in [-120, 120] with dz = 0.4, rho in (0, 60] with drho = 0.4.
    pub fn desk() -> Self {
        Self { z_min: -120.0, z_max: 120.0, dz: 0.4, rho_max: 60.0, drho: 0.4, half_offset: true }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.z_min < 0.0 && 0.0 < self.z_max) {
            return bad("grid.z_min/z_max", "need z_min < 0 < z_max");
        }
        if !(self.dz > 0.0) {
            return bad("grid.dz", "must be > 0");
        }
        if !(self.drho > 0.0) {
            return bad("grid.drho", "must be > 0");
        }
        if !(self.rho_max >= self.drho) {
            return bad("grid.rho_max", "must be at least one radial step");
        }
        if !self.half_offset {
            return bad("grid.half_offset", "radial nodes must be half-offset so rho = 0 is never sampled");
        }
        if self.nz() < 5 || self.nr() < 3 {
            return bad("grid", "too few nodes");
        }
        Ok(())
    }

    pub fn nz(&self) -> usize {
        ((self.z_max - self.z_min) / self.dz).round() as usize + 1
    }

    pub fn nr(&self) -> usize {
        (self.rho_max / self.drho).round() as usize
    }

    pub fn len(&self) -> usize {
        self.nz() * self.nr()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz
    }

    #[inline]
    pub fn rho(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.drho
    }

    pub fn z_axis(&self) -> UniformAxis {
        UniformAxis::new(self.z_min, self.dz, self.nz())
    }

    pub fn rho_axis(&self) -> UniformAxis {
        UniformAxis::new(0.5 * self.drho, self.drho, self.nr())
    }

    /// Quadrature weight `2 pi rho_j drho dz` of a node in column `j`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.rho(j) * self.drho * self.dz
    }

    pub fn radial_weights(&self) -> Vec<f64> {
        (0..self.nr()).map(|j| self.weight(j)).collect()
    }

    pub fn same_as(&self, other: &GridSpec2D) -> bool {
        self.z_axis().same_as(&other.z_axis()) && self.rho_axis().same_as(&other.rho_axis())
    }
}

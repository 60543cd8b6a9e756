//! Laser pulse, atomic potential and the analytic barrier geometry of the
//! field-suppressed Coulomb potential.
//!
//! Atomic units throughout. The interaction enters the Hamiltonian as
//! `+E(t) z`, so the classical force on the electron is `-dV/dz`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Linearly polarized few-cycle pulse `E(t) = F sin^2(pi t / NT) cos(2 pi t / T + phi)`
/// supported on `[0, N T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    /// Field amplitude.
    pub amplitude: f64,
    /// Optical period.
    pub period: f64,
    /// Number of optical cycles.
    pub cycles: u32,
    /// Carrier-envelope phase (rad).
    pub cep: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self { amplitude: 0.06, period: 110.0, cycles: 3, cep: 0.0 }
    }
}

impl PulseParams {
    pub fn new(amplitude: f64, period: f64, cycles: u32, cep: f64) -> Result<Self> {
        let p = Self { amplitude, period, cycles, cep };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::InvalidParameter { name: "F", reason: "must be > 0".into() });
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidParameter { name: "T", reason: "must be > 0".into() });
        }
        if self.cycles < 1 {
            return Err(Error::InvalidParameter { name: "N", reason: "must be >= 1".into() });
        }
        if !self.cep.is_finite() {
            return Err(Error::InvalidParameter { name: "phi", reason: "must be finite".into() });
        }
        Ok(())
    }

    /// Pulse duration `N T`.
    pub fn duration(&self) -> f64 {
        self.cycles as f64 * self.period
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Electric field at time `t`; exactly zero outside `(0, N T)`.
    pub fn field_at(&self, t: f64) -> f64 {
        let total = self.duration();
        if t <= 0.0 || t >= total {
            return 0.0;
        }
        let envelope = (PI * t / total).sin();
        self.amplitude * envelope * envelope * (2.0 * PI * t / self.period + self.cep).cos()
    }

    /// Centre of the envelope, where `|E|` peaks for `phi = 0`.
    pub fn peak_time(&self) -> f64 {
        0.5 * self.duration()
    }
}

/// Free-function form of [`PulseParams::field_at`].
pub fn field_at(p: &PulseParams, t: f64) -> f64 {
    p.field_at(t)
}

/// `V(z, rho, t) = -1/sqrt(z^2 + rho^2) + E(t) z`.
pub fn potential(z: f64, rho: f64, t: f64, p: &PulseParams) -> Result<f64> {
    let r = (z * z + rho * rho).sqrt();
    if r == 0.0 {
        return Err(Error::SingularOrigin);
    }
    Ok(-1.0 / r + p.field_at(t) * z)
}

/// Keldysh parameter `omega sqrt(2 I_p) / F`.
pub fn keldysh_gamma(p: &PulseParams, ionization_potential: f64) -> f64 {
    p.angular_frequency() * (2.0 * ionization_potential).sqrt() / p.amplitude
}

/// Barrier of the on-axis potential at one instant.
///
/// All positions are signed and lie on the downfield half-axis, where
/// `E(t) z < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierGeometry {
    pub t: f64,
    pub field: f64,
    pub z_top: f64,
    pub v_top: f64,
    /// Inner and outer classical turning points `(z_entrance, z_exit)` at the
    /// requested energy; `None` when the energy lies above the barrier top.
    pub turning_points: Option<(f64, f64)>,
}

impl BarrierGeometry {
    /// `+1` when the barrier sits at `z > 0`, `-1` otherwise.
    pub fn downfield_sign(&self) -> f64 {
        -self.field.signum()
    }

    pub fn z_entrance(&self) -> Option<f64> {
        self.turning_points.map(|(a, _)| a)
    }

    pub fn z_exit(&self) -> Option<f64> {
        self.turning_points.map(|(_, b)| b)
    }
}

/// Barrier top and tunnel entrance/exit for energy `energy` at time `t`.
///
/// On the downfield half-axis `z = s u` with `u > 0` the potential reads
/// `-1/u - |E| u`; the turning points solve `|E| u^2 + energy u + 1 = 0`.
pub fn barrier_geometry(t: f64, energy: f64, p: &PulseParams) -> Result<BarrierGeometry> {
    let field = p.field_at(t);
    if field == 0.0 {
        return Err(Error::NoBarrier { t });
    }
    let f = field.abs();
    let s = -field.signum();
    let u_top = 1.0 / f.sqrt();
    let v_top = -2.0 * f.sqrt();
    let disc = energy * energy - 4.0 * f;
    let turning_points = if energy <= v_top && disc >= 0.0 {
        // The larger root is free of cancellation; the smaller follows from
        // the product of the roots, 1/|E|.
        let u_exit = (-energy + disc.sqrt()) / (2.0 * f);
        let u_entrance = 1.0 / (f * u_exit);
        Some((s * u_entrance, s * u_exit))
    } else {
        None
    };
    Ok(BarrierGeometry { t, field, z_top: s * u_top, v_top, turning_points })
}

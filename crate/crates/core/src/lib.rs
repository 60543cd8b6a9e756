//! Numerical core of `attoscope`: strong-field ionization of atomic hydrogen
//! by a few-cycle pulse, with phase-space and classical-trajectory analysis.

pub mod classical;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod phase_space;
pub mod pmpe;
pub mod reconstruct;
pub mod spectral1d;
pub mod tdse;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{GridSpec2D, UniformAxis};
pub use model::{barrier_geometry, field_at, keldysh_gamma, potential, BarrierGeometry, PulseParams};

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("potential evaluated at the Coulomb singularity z = rho = 0")]
    SingularOrigin,

    #[error("no potential barrier: the field vanishes at t = {t}")]
    NoBarrier { t: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("imaginary-time relaxation did not converge after {iterations} steps (last dE/dtau = {rate:e})")]
    NonConvergence { iterations: usize, rate: f64 },

    #[error("bound states {a} and {b} overlap by {overlap:e}")]
    DegeneracyResolution { a: usize, b: usize, overlap: f64 },

    #[error("propagation became unstable at t = {t}: norm grew by {growth:e} in one step")]
    Instability { t: f64, growth: f64 },

    #[error("momentum grid limit {p_max} exceeds the aliasing bound pi/(2 dz) = {bound}")]
    Aliasing { p_max: f64, bound: f64 },

    #[error("no inflection point of p_z(z) for E = {energy} in [{z_lo}, {z_hi}]")]
    NoInflection { energy: f64, z_lo: f64, z_hi: f64 },

    #[error("no sign change of the matching residual at t_s = {t_s}; scanned {} energies", table.len())]
    NoBracket { t_s: f64, table: Vec<(f64, f64)> },

    #[error("quantum momentum undefined near z = {z} at t = {t} (below density floor)")]
    MaskedQuantumMomentum { z: f64, t: f64 },

    #[error("no quantum momentum snapshot covers t = {t}")]
    NoSnapshot { t: f64 },

    #[error("step-size underflow at t = {t}, z = {z}")]
    StepUnderflow { t: f64, z: f64 },

    #[error("electron is bound: p_f^2 + 2 V_f = {energy2} < 0")]
    BoundElectron { energy2: f64 },

    #[error("reconstruction did not converge after {iterations} iterations (last t_s = {t_s}, residual {residual:e})")]
    ReconstructionFailed { iterations: usize, t_s: f64, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigendecomposition failed: {0}")]
    Diagonalization(String),

    #[error("array file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

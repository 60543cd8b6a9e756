//! Cylindrical time-dependent Schrödinger equation for hydrogen in a
//! linearly polarized field.

mod hamiltonian;
mod propagator;
mod relax;
mod wavefunction;

pub use hamiltonian::{cell_coulomb, Absorber, Hamiltonian2D};
pub use propagator::{propagate, Propagator, PropagatorConfig, Scheme};
pub use relax::{
    bound_states, ground_state, hydrogen_orbital, hydrogen_radial, legendre, BoundState, BoundStateSet,
    stationary_filter, RelaxationConfig,
};
pub use wavefunction::{fft_wavenumbers, Wavefunction2D};

pub(crate) use wavefunction::{apply_pz, inner_raw, ColumnFft};

/// `-<dV/dz>` for the Coulomb part, as the commutator `<i [V_c, p_z]>`
/// with the spectral momentum operator, plus the uniform field force
/// `-E <psi|psi>`. Not divided by the norm.
pub fn expectation_force(psi: &Wavefunction2D, ham: &Hamiltonian2D, field: f64) -> f64 {
    let mut p = psi.values.clone();
    apply_pz(&mut p, &psi.grid);
    let vpsi: Vec<_> = psi.values.iter().zip(&ham.coulomb).map(|(v, c)| v * c).collect();
    -2.0 * inner_raw(&psi.grid, &vpsi, &p).im - field * psi.norm_sqr()
}

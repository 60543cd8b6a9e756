use attoscope_core::phase_space::*;
use attoscope_core::tdse::*;
use attoscope_core::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn axis() -> UniformAxis {
    UniformAxis::new(-16.0, 0.05, 641)
}

fn pure(f: impl Fn(f64) -> C64) -> ReducedDensity1D {
    let z = axis();
    let mut psi: Vec<C64> = z.values().iter().map(|&x| f(x)).collect();
    let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * z.step;
    psi.iter_mut().for_each(|a| *a /= n.sqrt());
    ReducedDensity1D::from_pure(z, &psi, 0.0)
}

/// `|phi(p)|^2` by direct quadrature of the Fourier integral.
fn momentum_density(f: impl Fn(f64) -> C64, p: f64) -> f64 {
    let z = axis();
    let vals: Vec<C64> = z.values().iter().map(|&x| f(x)).collect();
    let n: f64 = vals.iter().map(|a| a.norm_sqr()).sum::<f64>() * z.step;
    let s: C64 = z.values().iter().zip(&vals).map(|(&x, v)| v * C64::from_polar(1.0, -p * x)).sum();
    (s * z.step).norm_sqr() / (2.0 * PI * n)
}

#[test]
fn oscillator_first_excited_state_is_negative_at_origin() {
    let rho = pure(|x| C64::new(x * (-0.5 * x * x).exp(), 0.0));
    let w = wigner_full_band(&rho);
    let i0 = w.z.position(0.0).round() as usize;
    let k0 = w.p.position(0.0).round() as usize;
    assert!((w.get(i0, k0) + 1.0 / PI).abs() <= 1e-3, "{}", w.get(i0, k0));
    assert!(w.max_imag_residue < 1e-10 * w.max());
}

#[test]
fn marginals_on_the_full_band_grid() {
    let f = |x: f64| C64::from_polar((-(x - 1.0).powi(2) / 2.0).exp(), 0.7 * x) + C64::new(0.5 * (-(x + 2.0).powi(2)).exp(), 0.0);
    let rho = pure(f);
    let w = wigner_full_band(&rho);
    let p0 = moments(&w, 0).unwrap();
    let diag = rho.diagonal();
    let err = p0.iter().zip(&diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "position marginal {err}");
    let pm = w.momentum_marginal();
    let mut worst = 0.0f64;
    for k in 0..w.p.len {
        worst = worst.max((pm[k] - momentum_density(f, w.p.at(k))).abs());
    }
    assert!(worst < 1e-6, "momentum marginal {worst}");
    assert!((w.total() - rho.trace()).abs() < 1e-8);
}

#[test]
fn direct_sum_agrees_with_fft_path() {
    let rho = pure(|x| C64::from_polar((-x * x / 3.0).exp(), -0.4 * x) * (1.0 + 0.3 * x));
    let full = wigner_full_band(&rho);
    let w = wigner(&rho, &full.p.clone()).unwrap();
    // Different end-point weights only; the Gaussian tails make them equal.
    let d = w.values.iter().zip(&full.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-10, "{d}");
}

#[test]
fn momentum_grid_beyond_the_nyquist_bound_is_an_error() {
    let rho = pure(|x| C64::new((-x * x).exp(), 0.0));
    let bound = nyquist_bound(0.05);
    let bad = UniformAxis::new(-1.1 * bound, 2.2 * bound / 100.0, 101);
    assert!(matches!(wigner(&rho, &bad), Err(Error::Aliasing { .. })));
    let ok = UniformAxis::new(-2.0, 4.0 / 511.0, 512);
    assert!(wigner(&rho, &ok).is_ok());
}

#[test]
fn flow_momentum_of_boosted_packet_and_real_state() {
    let k = 0.83;
    let rho = pure(|x| C64::from_polar((-x * x / 4.0).exp(), k * x));
    let w = wigner_full_band(&rho);
    let q = quantum_momentum(&w, 1e-6).unwrap();
    let qj = current_momentum(&rho, 1e-6);
    let j = current(&rho);
    for i in 0..q.q.len() {
        if q.mask[i] {
            assert!((q.q[i] - k).abs() < 1e-6, "{} at {}", q.q[i], w.z.at(i));
            assert!((q.q[i] - qj.q[i]).abs() < 1e-6);
            assert!((j[i] - k * rho.diagonal()[i]).abs() < 1e-6);
        }
    }
    let real = pure(|x| C64::new((-x * x / 2.0).exp() * (1.0 + x), 0.0));
    assert!(current(&real).iter().all(|x| x.abs() < 1e-10));
    assert!(moments(&wigner_full_band(&real), 1).unwrap().iter().all(|x| x.abs() < 1e-8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn gaussian_wigner_is_nonnegative(x0 in -3.0f64..3.0, k in -1.5f64..1.5, s in 0.6f64..2.0) {
        let rho = pure(|x| C64::from_polar((-(x - x0).powi(2) / (2.0 * s * s)).exp(), k * x));
        let w = wigner_full_band(&rho);
        prop_assert!(w.min() >= -1e-12, "{}", w.min());
    }

    #[test]
    fn current_is_first_moment(a in -2.0f64..2.0, b in -1.0f64..1.0) {
        let rho = pure(|x| C64::from_polar((-(x - a).powi(2) / 2.0).exp(), b * x + 0.2 * x * x) + C64::new(0.3 * (-(x + a).powi(2)).exp(), 0.0));
        let w = wigner_full_band(&rho);
        let p1 = moments(&w, 1).unwrap();
        let j = current(&rho);
        let d = p1.iter().zip(&j).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(d < 1e-10);
    }
}

#[test]
fn reduction_of_separable_state_is_pure() {
    let g = GridSpec2D { z_min: -10.0, z_max: 10.0, dz: 0.2, rho_max: 8.0, drho: 0.2, half_offset: true };
    let mut psi = Wavefunction2D::from_fn(g, 0.0, |z, r| C64::from_polar((-z * z / 2.0 - r * r).exp(), 0.3 * z));
    psi.normalize();
    let rho = ReducedDensity1D::reduce(&psi);
    assert!((rho.trace() - 1.0).abs() < 1e-12);
    assert!((rho.purity() - 1.0).abs() < 1e-10);
    assert!(rho.max_hermiticity_error() < 1e-12);
    let mut ent = Wavefunction2D::from_fn(g, 0.0, |z, r| C64::new((-(z - r).powi(2) - r * r).exp(), 0.0));
    ent.normalize();
    assert!(ReducedDensity1D::reduce(&ent).purity() < 0.99);
}

#[test]
fn first_moment_integrates_to_mean_momentum_of_2d_state() {
    let g = GridSpec2D { z_min: -15.0, z_max: 15.0, dz: 0.2, rho_max: 8.0, drho: 0.2, half_offset: true };
    let mut psi = Wavefunction2D::from_fn(g, 0.0, |z, r| C64::from_polar((-(z - 1.0).powi(2) / 3.0 - r * r / 2.0 - 0.2 * z * r).exp(), 0.5 * z + 0.1 * z * z));
    psi.normalize();
    let w = wigner_full_band(&ReducedDensity1D::reduce(&psi));
    let total_p: f64 = moments(&w, 1).unwrap().iter().sum::<f64>() * w.z.step;
    assert!((total_p - psi.expectation_pz()).abs() < 1e-6, "{total_p} vs {}", psi.expectation_pz());
}

#[test]
fn continuity_of_the_reduced_density() {
    let g = GridSpec2D { z_min: -30.0, z_max: 30.0, dz: 0.2, rho_max: 15.0, drho: 0.2, half_offset: true };
    let mut psi = Wavefunction2D::from_fn(g, 0.0, |z, r| C64::from_polar((-(z + 10.0).powi(2) / 4.0 - r * r / 8.0).exp(), -0.8 * z));
    psi.normalize();
    // Packet kept away from the Coulomb cusp, where the grid itself dominates the residual.
    let pulse = PulseParams::default();
    psi.t = 150.0;
    let cfg = PropagatorConfig { dt: 0.005, absorber: None, ..PropagatorConfig::default() };
    let h = 0.05;
    let times: Vec<f64> = (-2..=2).map(|k| 151.0 + h * k as f64).collect();
    let mut rhos = Vec::new();
    propagate(psi, &pulse, &cfg, 151.2, &times, |s| {
        rhos.push(ReducedDensity1D::reduce(s));
        Ok(())
    })
    .unwrap();
    let d: Vec<Vec<f64>> = rhos.iter().map(|r| r.diagonal()).collect();
    let j = current(&rhos[2]);
    let n = j.len();
    let (mut worst, mut peak) = (0.0f64, 0.0f64);
    for i in 2..n - 2 {
        let dt = (d[0][i] - 8.0 * d[1][i] + 8.0 * d[3][i] - d[4][i]) / (12.0 * h);
        let dj = (j[i - 2] - 8.0 * j[i - 1] + 8.0 * j[i + 1] - j[i + 2]) / (12.0 * g.dz);
        worst = worst.max((dt + dj).abs());
        peak = peak.max(dj.abs());
    }
    assert!(worst < 1e-3 * peak, "residual {worst} vs peak {peak}");
}

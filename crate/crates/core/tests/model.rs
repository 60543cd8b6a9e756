use attoscope_core::*;
use proptest::prelude::*;

#[test]
fn keldysh_parameter_of_default_pulse() {
    let g = keldysh_gamma(&PulseParams::default(), 0.5);
    assert!((g - 0.952).abs() <= 1e-3, "gamma = {g}");
}

#[test]
fn barrier_at_pulse_peak_matches_quadratic_roots() {
    let p = PulseParams::default();
    let geo = barrier_geometry(165.0, -0.5, &p).unwrap();
    assert!((geo.v_top + 2.0 * 0.06f64.sqrt()).abs() < 1e-12);
    assert!((geo.v_top - (-0.4899)).abs() < 1e-4);
    let (a, b) = geo.turning_points.unwrap();
    assert!((a - 10.0 / 3.0).abs() < 1e-8 && (b - 5.0).abs() < 1e-8, "{a} {b}");
}

#[test]
fn barrier_needs_a_field() {
    let p = PulseParams::default();
    assert!(barrier_geometry(0.0, -0.5, &p).is_err());
    assert!(potential(0.0, 0.0, 10.0, &p).is_err());
}

#[test]
fn invalid_pulses_are_rejected() {
    assert!(PulseParams::new(-0.06, 110.0, 3, 0.0).is_err());
    assert!(PulseParams::new(0.06, 0.0, 3, 0.0).is_err());
    assert!(PulseParams::new(0.06, 110.0, 0, 0.0).is_err());
    assert!(PulseParams::new(0.04, 110.0, 3, 0.75 * std::f64::consts::PI).is_ok());
}

proptest! {
    #[test]
    fn field_vanishes_outside_and_is_bounded(t in -100.0f64..500.0, cep in 0.0f64..6.3) {
        let p = PulseParams::new(0.06, 110.0, 3, cep).unwrap();
        let e = p.field_at(t);
        prop_assert!(e.abs() <= 0.06 + 1e-15);
        if !(0.0..=330.0).contains(&t) {
            prop_assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn turning_points_solve_the_energy_equation(t in 140.0f64..190.0, de in 0.001f64..0.3) {
        let p = PulseParams::default();
        let geo = barrier_geometry(t, 0.0, &p).unwrap();
        let e = geo.v_top - de;
        let g = barrier_geometry(t, e, &p).unwrap();
        let (a, b) = g.turning_points.unwrap();
        for z in [a, b] {
            let v = potential(z, 0.0, t, &p).unwrap();
            prop_assert!((v - e).abs() < 1e-9);
        }
        prop_assert!(a.abs() < g.z_top.abs() && g.z_top.abs() < b.abs());
    }
}

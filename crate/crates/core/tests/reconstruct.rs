use attoscope_core::classical::InitialCondition;
use attoscope_core::reconstruct::*;
use attoscope_core::*;

/// `-int E dt` in closed form for the sin^2 envelope.
fn impulse_closed_form(p: &PulseParams, a: f64, b: f64) -> f64 {
    let w = p.angular_frequency();
    let o = w / p.cycles as f64;
    let phi = p.cep;
    let prim = |t: f64| {
        0.5 * p.amplitude * ((w * t + phi).sin() / w - ((w + o) * t + phi).sin() / (2.0 * (w + o)) - ((w - o) * t + phi).sin() / (2.0 * (w - o)))
    };
    -(prim(b) - prim(a))
}

#[test]
fn detection_examples() {
    assert!((asymptotic_momentum(1.0, 1e12).unwrap() - 1.0).abs() < 1e-9);
    assert!((asymptotic_momentum(0.3, 50.0).unwrap() - 0.05f64.sqrt()).abs() < 1e-15);
    assert!(matches!(asymptotic_momentum(0.1, 50.0), Err(Error::BoundElectron { .. })));
}

#[test]
fn impulse_matches_closed_form() {
    for cep in [0.0, 0.25 * std::f64::consts::PI, 0.5 * std::f64::consts::PI] {
        let p = PulseParams::new(0.06, 110.0, 3, cep).unwrap();
        for (a, b) in [(0.0, 330.0), (149.0, 330.0), (155.5, 230.0), (160.0, 160.0)] {
            let num = field_impulse(&p, a, b);
            let exact = impulse_closed_form(&p, a, b);
            assert!((num - exact).abs() < 1e-10, "{a}..{b}: {num} vs {exact}");
        }
    }
    assert!(field_impulse(&PulseParams::default(), 0.0, 330.0).abs() < 1e-9);
}

#[test]
fn closed_loop_reconstruction_is_exact() {
    let pulse = PulseParams::default();
    let model = |t: f64| -> Result<InitialCondition> {
        let z_i = 8.0 - 0.2 * (t - 155.0);
        Ok(InitialCondition { t_s: t, z_i, energy: 0.0, p_0: 0.25 + 0.01 * (t - 155.0), residual: 0.0 })
    };
    let cfg = ReconstructionConfig::for_pulse(&pulse);
    for t_true in [151.0, 154.2, 156.3] {
        let ic = model(t_true).unwrap();
        let p_nc = ic.p_0 + field_impulse(&pulse, t_true, pulse.duration());
        let p_d = (p_nc * p_nc - 2.0 / ic.z_i).sqrt();
        assert!(p_d.is_finite());
        let r = reconstruct_ts(p_d, &pulse, model, &cfg).unwrap();
        assert!((r.t_s - t_true).abs() < 1e-4, "{t_true}: {}", r.t_s);
        assert!(r.residual.abs() <= 1e-6 && r.iterations <= cfg.max_iterations);
        let again = reconstruct_ts(p_d, &pulse, model, &cfg).unwrap();
        assert_eq!(again, r);
    }
}

#[test]
fn impossible_targets_do_not_converge() {
    let pulse = PulseParams::default();
    let model = |t: f64| -> Result<InitialCondition> { Ok(InitialCondition { t_s: t, z_i: 6.0, energy: 0.0, p_0: 0.2, residual: 0.0 }) };
    let cfg = ReconstructionConfig { max_iterations: 10, ..ReconstructionConfig::for_pulse(&pulse) };
    assert!(reconstruct_ts(50.0, &pulse, model, &cfg).is_err());
}

//! Starting-time reconstruction from the detected asymptotic momentum.
//!
//! Without Coulomb forces the final momentum is `p_0 - int_{t_s}^{NT} E dt`.
//! The Coulomb correction is folded into the target
//! `sqrt(p_d^2 + 2/z_0)`, and `t_s` is found as the root of
//! `r(t_s) = p_0(t_s) + impulse(t_s, NT) - sqrt(p_d^2 + 2/z_0(t_s))`.

use crate::classical::{InitialCondition, Outcome, Trajectory};
use crate::error::{Error, Result};
use crate::model::PulseParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub p_d: f64,
    /// Starting time of the trajectory that generated the record, if any.
    pub source_t_s: Option<f64>,
}

/// `p_d = sqrt(p_f^2 - 2/|z_f|)`, the momentum left after climbing out of
/// the Coulomb well once the pulse is over.
pub fn asymptotic_momentum(p_f: f64, z_f: f64) -> Result<f64> {
    let e2 = p_f * p_f - 2.0 / z_f.abs();
    if e2 < 0.0 {
        return Err(Error::BoundElectron { energy2: e2 });
    }
    Ok(e2.sqrt())
}

pub fn detect_momentum(traj: &Trajectory) -> Result<DetectionRecord> {
    if traj.outcome != Outcome::DirectEscape {
        return Err(Error::InvalidParameter { name: "trajectory", reason: format!("outcome is {}, not direct-escape", traj.outcome.as_str()) });
    }
    Ok(DetectionRecord { p_d: asymptotic_momentum(traj.p_f, traj.z_f)?, source_t_s: Some(traj.initial.t_s) })
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    // Split into pieces so the oscillating integrand is resolved before the
    // error estimate is trusted.
    let pieces = (((b - a).abs() / 5.0).ceil() as usize).max(1);
    let h = (b - a) / pieces as f64;
    let ptol = tol / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            rec(f, x0, x1, f0, fm, f1, whole, ptol, 40)
        })
        .sum()
}

/// Momentum transferred by the field, `-int_{t_s}^{t_f} E dt`.
pub fn field_impulse(pulse: &PulseParams, t_s: f64, t_f: f64) -> f64 {
    -adaptive_simpson(&|t| pulse.field_at(t), t_s, t_f, 1e-13)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    pub seed: f64,
    pub second_seed: f64,
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl ReconstructionConfig {
    /// Seeds an eighth of a period before the pulse peak and half an atomic
    /// unit later.
    pub fn for_pulse(pulse: &PulseParams) -> Self {
        let seed = pulse.peak_time() - pulse.period / 8.0;
        Self { seed, second_seed: seed + 0.5, residual_tol: 1e-6, step_tol: 1e-4, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionResult {
    pub p_d: f64,
    pub t_s: f64,
    pub z_0: f64,
    pub p_0: f64,
    /// No-Coulomb final momentum `p_0 + impulse` at `t_s`.
    pub p_f_nc: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Secant iteration on `r(t_s)`, falling back to bisection on the last
/// sign-change bracket when a secant step leaves it or stalls.
pub fn reconstruct_ts<S>(p_d: f64, pulse: &PulseParams, seed_ic: S, cfg: &ReconstructionConfig) -> Result<ReconstructionResult>
where
    S: Fn(f64) -> Result<InitialCondition>,
{
    let t_f = pulse.duration();
    let eval = |t: f64| -> Result<(f64, InitialCondition, f64)> {
        let ic = seed_ic(t)?;
        let p_nc = ic.p_0 + field_impulse(pulse, t, t_f);
        let target = (p_d * p_d + 2.0 / ic.z_i.abs()).sqrt();
        Ok((p_nc - target, ic, p_nc))
    };
    let done = |t: f64, (r, ic, p_nc): (f64, InitialCondition, f64), it: usize| ReconstructionResult {
        p_d,
        t_s: t,
        z_0: ic.z_i,
        p_0: ic.p_0,
        p_f_nc: p_nc,
        iterations: it,
        residual: r,
    };
    let (mut t0, mut t1) = (cfg.seed, cfg.second_seed);
    let mut e0 = eval(t0)?;
    let mut e1 = eval(t1)?;
    let mut bracket: Option<((f64, f64), (f64, f64))> = None;
    let note = |a: f64, ra: f64, b: f64, rb: f64, br: &mut Option<((f64, f64), (f64, f64))>| {
        if ra.signum() != rb.signum() {
            *br = Some(((a, ra), (b, rb)));
        }
    };
    note(t0, e0.0, t1, e1.0, &mut bracket);
    for it in 1..=cfg.max_iterations {
        if e1.0.abs() <= cfg.residual_tol {
            return Ok(done(t1, e1, it));
        }
        let slope = (e1.0 - e0.0) / (t1 - t0);
        let mut t2 = if slope != 0.0 && slope.is_finite() { t1 - e1.0 / slope } else { f64::NAN };
        if let Some(((a, _), (b, _))) = bracket {
            let (lo, hi) = (a.min(b), a.max(b));
            if !(t2 > lo && t2 < hi) {
                t2 = 0.5 * (lo + hi);
            }
        } else if !t2.is_finite() || (t2 - t1).abs() > 0.25 * pulse.period {
            // Without a bracket, limit the secant jump to a quarter period.
            t2 = t1 - 0.25 * pulse.period * e1.0.signum() * slope.signum();
        }
        let e2 = eval(t2)?;
        if let Some(((a, ra), (b, rb))) = bracket {
            if e2.0.signum() == ra.signum() {
                bracket = Some(((t2, e2.0), (b, rb)));
            } else {
                bracket = Some(((a, ra), (t2, e2.0)));
            }
        } else {
            note(t1, e1.0, t2, e2.0, &mut bracket);
        }
        let step = (t2 - t1).abs();
        t0 = t1;
        e0 = e1;
        t1 = t2;
        e1 = e2;
        if e1.0.abs() <= cfg.residual_tol || step <= cfg.step_tol {
            return Ok(done(t1, e1, it));
        }
    }
    Err(Error::ReconstructionFailed { iterations: cfg.max_iterations, t_s: t1, residual: e1.0 })
}

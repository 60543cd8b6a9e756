//! On-axis classical dynamics: instantaneous phase-space curves, the
//! outermost inflection point of `p_z(z)`, matching of the flow momentum to a
//! classical energy, and adaptive propagation of escape trajectories.

use crate::error::{Error, Result};
use crate::model::{barrier_geometry, PulseParams};
use crate::phase_space::{QuantumMomentumCurve, QuantumMomentumSeries};

/// On-axis potential `-1/|z| + E z` for a given field value.
#[inline]
pub fn axis_potential(z: f64, field: f64) -> f64 {
    -1.0 / z.abs() + field * z
}

/// `p_z(z; E) = sqrt(2 (E - V(z)))`, `None` where classically forbidden.
#[inline]
pub fn stationary_momentum(z: f64, field: f64, energy: f64) -> Option<f64> {
    let k = energy - axis_potential(z, field);
    (k >= 0.0).then(|| (2.0 * k).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCurve {
    pub t: f64,
    pub energy: f64,
    /// `(z, p_z)` on the allowed part of the sampled range.
    pub points: Vec<(f64, f64)>,
}

pub fn stationary_curve(t: f64, energy: f64, z_range: (f64, f64), samples: usize, pulse: &PulseParams) -> StationaryCurve {
    let field = pulse.field_at(t);
    let (a, b) = z_range;
    let n = samples.max(2);
    let points = (0..n)
        .filter_map(|k| {
            let z = a + (b - a) * k as f64 / (n - 1) as f64;
            if z == 0.0 {
                return None;
            }
            stationary_momentum(z, field, energy).map(|p| (z, p))
        })
        .collect();
    StationaryCurve { t, energy, points }
}

/// Scan spacing and differentiation step for the inflection search.
const SCAN_STEP: f64 = 0.01;
const STENCIL: f64 = 1e-3;

/// Five-point second derivative of `p_z` at `z`, `None` if any stencil node
/// is forbidden.
fn p_second_derivative(z: f64, field: f64, energy: f64) -> Option<f64> {
    let h = STENCIL;
    let f = |x: f64| stationary_momentum(x, field, energy);
    let (m2, m1, c, p1, p2) = (f(z - 2.0 * h)?, f(z - h)?, f(z)?, f(z + h)?, f(z + 2.0 * h)?);
    Some((-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h))
}

/// Outermost `z` in `z_range` (one side of the nucleus) where
/// `d^2 p_z / dz^2` changes sign, to `1e-6`.
pub fn outermost_inflection(t: f64, energy: f64, z_range: (f64, f64), pulse: &PulseParams) -> Result<f64> {
    let field = pulse.field_at(t);
    let (lo, hi) = (z_range.0.min(z_range.1), z_range.0.max(z_range.1));
    let no = || Error::NoInflection { energy, z_lo: lo, z_hi: hi };
    if field == 0.0 {
        return Err(no());
    }
    // Scan from the end farthest from the nucleus inward.
    let (far, near) = if z_range.0.abs() > z_range.1.abs() { z_range } else { (z_range.1, z_range.0) };
    let steps = ((hi - lo) / SCAN_STEP).ceil().max(1.0) as usize;
    let at = |k: usize| if k == steps { near } else { far + k as f64 * (near - far) / steps as f64 };
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let z = at(k);
        let Some(d) = p_second_derivative(z, field, energy) else {
            prev = None;
            continue;
        };
        if let Some((zp, dp)) = prev {
            if d == 0.0 {
                return Ok(z);
            }
            if d.signum() != dp.signum() {
                return bisect_inflection(z, zp, field, energy).ok_or_else(no);
            }
        }
        prev = Some((z, d));
    }
    Err(no())
}

fn bisect_inflection(mut a: f64, mut b: f64, field: f64, energy: f64) -> Option<f64> {
    let mut fa = p_second_derivative(a, field, energy)?;
    while (b - a).abs() > 1e-7 {
        let m = 0.5 * (a + b);
        let fm = p_second_derivative(m, field, energy)?;
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub t_s: f64,
    pub z_i: f64,
    pub energy: f64,
    pub p_0: f64,
    /// `q(z_i) - p_z(z_i; E_s)`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingConfig {
    /// Bracket `[V_top + eps, V_top + width]`.
    pub eps: f64,
    pub width: f64,
    pub samples: usize,
    pub tol: f64,
    /// Outer end of the inflection search window.
    pub z_max: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self { eps: 1e-4, width: 1.0, samples: 64, tol: 1e-6, z_max: 120.0 }
    }
}

/// Solve `q(z_i(E), t_s) = p_z(z_i(E), t_s; E)` for `E` above the barrier top.
/// `q` gives the flow momentum at `z` at the instant `t_s`.
pub fn solve_initial_condition_with<Q>(t_s: f64, q: Q, pulse: &PulseParams, cfg: &MatchingConfig) -> Result<InitialCondition>
where
    Q: Fn(f64) -> Result<f64>,
{
    let geo = barrier_geometry(t_s, 0.0, pulse).map_err(|_| Error::NoBracket { t_s, table: Vec::new() })?;
    let field = geo.field;
    let s = geo.downfield_sign();
    let z_range = (geo.z_top, s * cfg.z_max);
    let g = |e: f64| -> Result<(f64, f64, f64)> {
        let zi = outermost_inflection(t_s, e, z_range, pulse)?;
        let p = stationary_momentum(zi, field, e).unwrap_or(0.0);
        // Flow momentum along the escape direction.
        Ok((s * q(zi)? - p, zi, p))
    };
    let mut table = Vec::new();
    let mut lo_e = geo.v_top + cfg.eps;
    for widen in [cfg.width, 2.0 * cfg.width] {
        let hi_e = geo.v_top + widen;
        let n = cfg.samples.max(2);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=n {
            let e = lo_e + (hi_e - lo_e) * k as f64 / n as f64;
            let val = g(e).map(|v| v.0).unwrap_or(f64::NAN);
            table.push((e, val));
            if !val.is_finite() {
                prev = None;
                continue;
            }
            if val.abs() <= cfg.tol {
                return finish(t_s, e, &g);
            }
            if let Some((ep, vp)) = prev {
                if vp.signum() != val.signum() {
                    return refine(t_s, (ep, vp), (e, val), cfg.tol, &g, table);
                }
            }
            prev = Some((e, val));
        }
        lo_e = hi_e;
    }
    Err(Error::NoBracket { t_s, table })
}

fn finish<G>(t_s: f64, e: f64, g: &G) -> Result<InitialCondition>
where
    G: Fn(f64) -> Result<(f64, f64, f64)>,
{
    let (r, z_i, p_0) = g(e)?;
    Ok(InitialCondition { t_s, z_i, energy: e, p_0, residual: r })
}

/// Illinois-modified regula falsi with a bisection safeguard.
fn refine<G>(t_s: f64, mut a: (f64, f64), mut b: (f64, f64), tol: f64, g: &G, table: Vec<(f64, f64)>) -> Result<InitialCondition>
where
    G: Fn(f64) -> Result<(f64, f64, f64)>,
{
    let mut side = 0i32;
    for it in 0..200 {
        let mut e = (a.0 * b.1 - b.0 * a.1) / (b.1 - a.1);
        if !(e > a.0.min(b.0) && e < a.0.max(b.0)) || it % 8 == 7 {
            e = 0.5 * (a.0 + b.0);
        }
        let v = g(e)?.0;
        if v.abs() <= tol || (b.0 - a.0).abs() < 1e-15 {
            return finish(t_s, e, g);
        }
        if v.signum() == b.1.signum() {
            b = (e, v);
            if side == 1 {
                a.1 *= 0.5;
            }
            side = 1;
        } else {
            a = (e, v);
            if side == -1 {
                b.1 *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::NoBracket { t_s, table })
}

pub fn solve_initial_condition(t_s: f64, q: &QuantumMomentumCurve, pulse: &PulseParams, cfg: &MatchingConfig) -> Result<InitialCondition> {
    solve_initial_condition_with(t_s, |z| q.value_at(z), pulse, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    DirectEscape,
    Recapture,
    Rescatter,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::DirectEscape => "direct-escape",
            Outcome::Recapture => "recapture",
            Outcome::Rescatter => "rescatter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: InitialCondition,
    pub samples: Vec<TrajectorySample>,
    pub outcome: Outcome,
    pub t_f: f64,
    pub z_f: f64,
    pub p_f: f64,
    /// `p_f^2/2 - 1/|z_f|` at the final time (field off after the pulse).
    pub energy_f: f64,
}

impl Trajectory {
    /// State at a time that was requested as a stop.
    pub fn state_at(&self, t: f64) -> Option<TrajectorySample> {
        self.samples.iter().copied().find(|s| (s.t - t).abs() <= 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Coulomb softening used only inside `|z| < 1`.
    pub softening: f64,
    pub max_step: f64,
    /// Radius whose re-entry marks rescattering.
    pub rescatter_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, softening: 0.1, max_step: 1.0, rescatter_radius: 2.0 }
    }
}

/// `-dV/dz` on the axis, Coulomb regularized inside `|z| < 1`.
#[inline]
pub fn axis_force(z: f64, field: f64, softening: f64) -> f64 {
    let coul = if z.abs() < 1.0 {
        -z / (z * z + softening * softening).powf(1.5)
    } else {
        -z.signum() / (z * z)
    };
    coul - field
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrate `dz/dt = p`, `dp/dt = force(z, t)` from `(t0, z0, p0)`,
/// stopping exactly at each of `stops` (ascending, within `(t0, t_end]`).
/// `observe` sees every accepted step.
pub fn integrate<F, O>(force: F, t0: f64, y0: [f64; 2], t_end: f64, stops: &[f64], cfg: &IntegratorConfig, mut observe: O) -> Result<[f64; 2]>
where
    F: Fn(f64, f64) -> f64,
    O: FnMut(f64, [f64; 2], bool),
{
    let rhs = |t: f64, y: [f64; 2]| [y[1], force(y[0], t)];
    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    targets.push(t_end);
    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-3f64.min(cfg.max_step);
    for &target in &targets {
        while t < target {
            let mut step = h.min(target - t).min(cfg.max_step);
            let last = step >= target - t;
            let mut k = [[0.0; 2]; 7];
            k[0] = rhs(t, y);
            for s in 1..7 {
                let mut yi = y;
                for (r, a) in A[s].iter().enumerate().take(s) {
                    yi[0] += step * a * k[r][0];
                    yi[1] += step * a * k[r][1];
                }
                k[s] = rhs(t + C[s] * step, yi);
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for c in 0..2 {
                let (mut s5, mut s4) = (0.0, 0.0);
                for s in 0..7 {
                    s5 += B5[s] * k[s][c];
                    s4 += B4[s] * k[s][c];
                }
                y5[c] += step * s5;
                let scale = cfg.atol + cfg.rtol * y[c].abs().max(y5[c].abs());
                err = err.max((step * (s5 - s4) / scale).abs());
            }
            if !err.is_finite() {
                err = 1e10;
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                observe(t, y, last && target != t_end);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = step * grow;
            } else {
                step *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                h = step;
            }
            if h < 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, z: y[0] });
            }
        }
    }
    Ok(y)
}

/// Propagate from the initial condition to `until`, recording every accepted
/// step and the states at `sample_times`.
pub fn propagate_trajectory(ic: &InitialCondition, pulse: &PulseParams, until: f64, sample_times: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    let force = |z: f64, t: f64| axis_force(z, pulse.field_at(t), cfg.softening);
    let mut samples = vec![TrajectorySample { t: ic.t_s, z: ic.z_i, p: ic.p_0 }];
    let mut left = ic.z_i.abs() >= cfg.rescatter_radius;
    let mut rescattered = false;
    let mut stops: Vec<f64> = sample_times.to_vec();
    stops.sort_by(f64::total_cmp);
    let downfield = ic.z_i.signum();
    let mut z_prev = ic.z_i;
    let y = integrate(force, ic.t_s, [ic.z_i, downfield * ic.p_0], until, &stops, cfg, |t, y, _| {
        samples.push(TrajectorySample { t, z: y[0], p: y[1] });
        // A sign change between accepted steps is a pass through the core.
        let crossed = y[0].signum() != z_prev.signum();
        if left && (y[0].abs() < cfg.rescatter_radius || crossed) {
            rescattered = true;
        } else if y[0].abs() >= cfg.rescatter_radius {
            left = true;
        }
        z_prev = y[0];
    })?;
    let (z_f, p_f) = (y[0], y[1]);
    let energy_f = 0.5 * p_f * p_f - 1.0 / z_f.abs() + pulse.field_at(until) * z_f;
    let outcome = if rescattered {
        Outcome::Rescatter
    } else if energy_f < 0.0 {
        Outcome::Recapture
    } else if p_f * z_f.signum() > 0.0 {
        Outcome::DirectEscape
    } else {
        // Unbound but heading back towards the core.
        Outcome::Rescatter
    };
    Ok(Trajectory { initial: *ic, samples, outcome, t_f: until, z_f, p_f, energy_f })
}

/// One trajectory of an ensemble and its deviation from the flow momentum.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub trajectory: Trajectory,
    /// `(t, |p(t) - q(z(t), t)|)`, `None` where `q` is masked.
    pub deviations: Vec<(f64, Option<f64>)>,
}

/// Seed, propagate and compare one trajectory per starting time. Starting
/// times whose seeding fails are returned as errors in place.
pub fn ensemble(
    starts: &[f64],
    q: &QuantumMomentumSeries,
    pulse: &PulseParams,
    compare_at: &[f64],
    matching: &MatchingConfig,
    integ: &IntegratorConfig,
) -> Vec<Result<EnsembleMember>> {
    use rayon::prelude::*;
    starts
        .par_iter()
        .map(|&t_s| {
            let ic = solve_initial_condition_with(t_s, |z| q.value_at(z, t_s), pulse, matching)?;
            let until = pulse.duration();
            let mut times: Vec<f64> = compare_at.iter().copied().filter(|&t| t > t_s).collect();
            times.sort_by(f64::total_cmp);
            let traj = propagate_trajectory(&ic, pulse, until.max(times.last().copied().unwrap_or(until)), &times, integ)?;
            let deviations = times
                .iter()
                .map(|&t| {
                    let s = traj.state_at(t);
                    (t, s.and_then(|s| q.value_at(s.z, t).ok().map(|qv| (s.p - qv).abs())))
                })
                .collect();
            Ok(EnsembleMember { trajectory: traj, deviations })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_at_barrier_top_touches_zero() {
        let p = PulseParams::default();
        let geo = barrier_geometry(165.0, 0.0, &p).unwrap();
        let pz = stationary_momentum(geo.z_top, geo.field, geo.v_top).unwrap();
        assert!(pz < 1e-6);
        let c = stationary_curve(165.0, -0.5, (3.0, 6.0), 301, &p);
        assert!(c.points.iter().all(|&(z, _)| !(z > 10.0 / 3.0 + 1e-9 && z < 5.0 - 1e-9)));
    }

    #[test]
    fn force_is_minus_gradient() {
        for &z in &[1.5, 3.0, -2.5, 7.0] {
            let h = 1e-5;
            let num = -(axis_potential(z + h, 0.03) - axis_potential(z - h, 0.03)) / (2.0 * h);
            assert!((axis_force(z, 0.03, 0.1) - num).abs() < 1e-8);
        }
    }
}

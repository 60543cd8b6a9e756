//! Run configuration: a flat `key = value` file with `[section]` headers.

use std::fmt::Write as _;
use std::path::Path;

use attoscope_core::phase_space::{nyquist_bound, DEFAULT_FLOOR};
use attoscope_core::spectral1d::DEFAULT_ST_WIDTH;
use attoscope_core::tdse::{Absorber, PropagatorConfig, RelaxationConfig};
use attoscope_core::{GridSpec2D, PulseParams};

/// One problem found in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// 1-based line, when the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundSettings {
    pub dtau: f64,
    pub max_steps: usize,
    pub rate_tol: f64,
    /// Project onto the stationary state of the real-time propagator.
    pub polish: bool,
    pub polish_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    /// Instants with a stored wavefunction and Wigner map.
    pub wigner_times: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_nodes: usize,
    pub density_floor: f64,
    /// Flow-momentum snapshots every `fine_step` inside `[fine_start, fine_end]`
    /// and every `coarse_step` elsewhere in the pulse.
    pub fine_start: f64,
    pub fine_end: f64,
    pub fine_step: f64,
    pub coarse_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectral1DSettings {
    pub z_max: f64,
    pub dz: f64,
    pub dt: f64,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub density_times: Vec<f64>,
    pub current_times: Vec<f64>,
    pub st_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySettings {
    pub starts: Vec<f64>,
    pub sample_step: f64,
    pub rescatter_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmpeSettings {
    pub n_max: u32,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pulse: PulseParams,
    pub grid: GridSpec2D,
    pub propagator: PropagatorConfig,
    pub ground: GroundSettings,
    pub analysis: AnalysisSettings,
    pub spectral1d: Spectral1DSettings,
    pub trajectories: TrajectorySettings,
    pub pmpe: PmpeSettings,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pulse: PulseParams::default(),
            grid: GridSpec2D::production(),
            propagator: PropagatorConfig { dt: 0.02, ..PropagatorConfig::default() },
            ground: GroundSettings { dtau: 0.05, max_steps: 40_000, rate_tol: 1e-8, polish: true, polish_time: 50.0 },
            analysis: AnalysisSettings {
                wigner_times: vec![155.0, 158.0, 160.0, 165.0, 180.0, 185.0, 210.0, 230.0],
                p_min: -2.0,
                p_max: 2.0,
                p_nodes: 512,
                density_floor: DEFAULT_FLOOR,
                fine_start: 140.0,
                fine_end: 200.0,
                fine_step: 1.0,
                coarse_step: 5.0,
            },
            spectral1d: Spectral1DSettings {
                z_max: 150.0,
                dz: 0.25,
                dt: 0.02,
                start: 140.0,
                end: 190.0,
                step: 1.0,
                density_times: vec![155.0, 160.0, 165.0],
                current_times: vec![165.0],
                st_width: DEFAULT_ST_WIDTH,
            },
            trajectories: TrajectorySettings {
                starts: vec![149.0, 151.0, 153.0, 154.0, 155.0, 156.0, 157.0, 158.0, 159.0, 161.0, 163.0, 165.0],
                sample_step: 0.5,
                rescatter_radius: 2.0,
            },
            pmpe: PmpeSettings { n_max: 4, times: vec![158.0, 180.0] },
            output_dir: "out".into(),
        }
    }
}

fn number_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))).collect()
}

fn list_string(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Vec<ConfigIssue>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![ConfigIssue { line: None, message: format!("cannot read {}: {e}", path.display()) }])?;
        Self::parse(&text)
    }

    /// Parse and validate. Every problem found is reported.
    pub fn parse(text: &str) -> Result<Self, Vec<ConfigIssue>> {
        let mut cfg = RunConfig::default();
        let mut issues = Vec::new();
        let mut section = String::new();
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[') {
                match name.strip_suffix(']') {
                    Some(n) => section = n.trim().to_string(),
                    None => issues.push(ConfigIssue { line: Some(line), message: format!("malformed section header `{s}`") }),
                }
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                issues.push(ConfigIssue { line: Some(line), message: format!("expected `key = value`, found `{s}`") });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let full = format!("{section}.{key}");
            if !seen.insert(full.clone()) {
                issues.push(ConfigIssue { line: Some(line), message: format!("`{full}` given twice") });
            }
            if let Err(m) = cfg.set(&full, value) {
                issues.push(ConfigIssue { line: Some(line), message: m });
            }
        }
        issues.extend(cfg.validate().into_iter().map(|message| ConfigIssue { line: None, message }));
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(issues)
        }
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let f = || v.parse::<f64>().map_err(|_| format!("`{key}`: `{v}` is not a number"));
        let u = || v.parse::<usize>().map_err(|_| format!("`{key}`: `{v}` is not a non-negative integer"));
        let b = || match v {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(format!("`{key}`: `{v}` is not a boolean")),
        };
        let l = || number_list(v).map_err(|m| format!("`{key}`: {m}"));
        match key {
            "pulse.F" => self.pulse.amplitude = f()?,
            "pulse.T" => self.pulse.period = f()?,
            "pulse.N" => self.pulse.cycles = u()? as u32,
            "pulse.phi" => self.pulse.cep = f()?,
            "grid.z_min" => self.grid.z_min = f()?,
            "grid.z_max" => self.grid.z_max = f()?,
            "grid.dz" => self.grid.dz = f()?,
            "grid.rho_max" => self.grid.rho_max = f()?,
            "grid.drho" => self.grid.drho = f()?,
            "propagator.dt" => self.propagator.dt = f()?,
            "propagator.absorber" => {
                if !b()? {
                    self.propagator.absorber = None;
                } else if self.propagator.absorber.is_none() {
                    self.propagator.absorber = Some(Absorber::default());
                }
            }
            "propagator.absorber_strength" => self.propagator.absorber.get_or_insert_with(Absorber::default).strength = f()?,
            "propagator.absorber_width" => self.propagator.absorber.get_or_insert_with(Absorber::default).width_fraction = f()?,
            "ground.dtau" => self.ground.dtau = f()?,
            "ground.max_steps" => self.ground.max_steps = u()?,
            "ground.rate_tol" => self.ground.rate_tol = f()?,
            "ground.polish" => self.ground.polish = b()?,
            "ground.polish_time" => self.ground.polish_time = f()?,
            "analysis.wigner_times" => self.analysis.wigner_times = l()?,
            "analysis.p_min" => self.analysis.p_min = f()?,
            "analysis.p_max" => self.analysis.p_max = f()?,
            "analysis.p_nodes" => self.analysis.p_nodes = u()?,
            "analysis.density_floor" => self.analysis.density_floor = f()?,
            "analysis.fine_start" => self.analysis.fine_start = f()?,
            "analysis.fine_end" => self.analysis.fine_end = f()?,
            "analysis.fine_step" => self.analysis.fine_step = f()?,
            "analysis.coarse_step" => self.analysis.coarse_step = f()?,
            "spectral1d.z_max" => self.spectral1d.z_max = f()?,
            "spectral1d.dz" => self.spectral1d.dz = f()?,
            "spectral1d.dt" => self.spectral1d.dt = f()?,
            "spectral1d.start" => self.spectral1d.start = f()?,
            "spectral1d.end" => self.spectral1d.end = f()?,
            "spectral1d.step" => self.spectral1d.step = f()?,
            "spectral1d.density_times" => self.spectral1d.density_times = l()?,
            "spectral1d.current_times" => self.spectral1d.current_times = l()?,
            "spectral1d.st_width" => self.spectral1d.st_width = f()?,
            "trajectories.starts" => self.trajectories.starts = l()?,
            "trajectories.sample_step" => self.trajectories.sample_step = f()?,
            "trajectories.rescatter_radius" => self.trajectories.rescatter_radius = f()?,
            "pmpe.n_max" => self.pmpe.n_max = u()? as u32,
            "pmpe.times" => self.pmpe.times = l()?,
            "output.dir" => self.output_dir = v.trim_matches('"').to_string(),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every violated invariant, as messages naming the field.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                e.push(format!("`{name}` must be > 0 (got {x})"));
            }
        };
        positive("pulse.F", self.pulse.amplitude);
        positive("pulse.T", self.pulse.period);
        positive("grid.dz", self.grid.dz);
        positive("grid.drho", self.grid.drho);
        positive("grid.rho_max", self.grid.rho_max);
        positive("propagator.dt", self.propagator.dt);
        positive("ground.dtau", self.ground.dtau);
        positive("ground.rate_tol", self.ground.rate_tol);
        positive("ground.polish_time", self.ground.polish_time);
        positive("analysis.density_floor", self.analysis.density_floor);
        positive("analysis.fine_step", self.analysis.fine_step);
        positive("analysis.coarse_step", self.analysis.coarse_step);
        positive("spectral1d.z_max", self.spectral1d.z_max);
        positive("spectral1d.dz", self.spectral1d.dz);
        positive("spectral1d.dt", self.spectral1d.dt);
        positive("spectral1d.step", self.spectral1d.step);
        positive("spectral1d.st_width", self.spectral1d.st_width);
        positive("trajectories.sample_step", self.trajectories.sample_step);
        positive("trajectories.rescatter_radius", self.trajectories.rescatter_radius);
        if self.pulse.cycles < 1 {
            e.push("`pulse.N` must be >= 1".into());
        }
        if !self.pulse.cep.is_finite() {
            e.push("`pulse.phi` must be finite".into());
        }
        if !(self.grid.z_min < 0.0 && self.grid.z_max > 0.0) {
            e.push(format!("grid must straddle the nucleus: z_min < 0 < z_max (got {}, {})", self.grid.z_min, self.grid.z_max));
        }
        if e.is_empty() {
            if let Err(err) = self.grid.validate() {
                e.push(format!("grid: {err}"));
            } else if let Err(err) = self.propagator.validate(&self.grid) {
                e.push(format!("propagator: {err}"));
            }
        }
        if let Some(a) = self.propagator.absorber {
            if !(a.width_fraction > 0.0 && a.width_fraction < 0.5) {
                e.push(format!("`propagator.absorber_width` must lie in (0, 0.5) (got {})", a.width_fraction));
            }
            if !(a.strength >= 0.0) {
                e.push(format!("`propagator.absorber_strength` must be >= 0 (got {})", a.strength));
            }
        }
        if self.ground.max_steps == 0 {
            e.push("`ground.max_steps` must be positive".into());
        }
        let an = &self.analysis;
        if an.dz_bound_violated(self.grid.dz) {
            e.push(format!(
                "momentum grid [{}, {}] violates the aliasing rule |p_max| <= pi/(2 dz) = {:.6} for dz = {}",
                an.p_min,
                an.p_max,
                nyquist_bound(self.grid.dz),
                self.grid.dz
            ));
        }
        if !(an.p_min < an.p_max) {
            e.push("`analysis.p_min` must be below `analysis.p_max`".into());
        }
        if an.p_nodes < 2 {
            e.push("`analysis.p_nodes` must be >= 2".into());
        }
        if an.fine_start > an.fine_end {
            e.push("`analysis.fine_start` must not exceed `analysis.fine_end`".into());
        }
        let duration = self.pulse.duration();
        let in_pulse = |name: &str, ts: &[f64], e: &mut Vec<String>| {
            for &t in ts {
                if !(t > 0.0 && t <= duration) {
                    e.push(format!("`{name}`: {t} lies outside the pulse (0, {duration}]"));
                }
            }
        };
        in_pulse("analysis.wigner_times", &an.wigner_times, &mut e);
        in_pulse("trajectories.starts", &self.trajectories.starts, &mut e);
        in_pulse("pmpe.times", &self.pmpe.times, &mut e);
        in_pulse("spectral1d.density_times", &self.spectral1d.density_times, &mut e);
        in_pulse("spectral1d.current_times", &self.spectral1d.current_times, &mut e);
        if self.pmpe.times.iter().any(|&t| t >= duration) {
            e.push("`pmpe.times` must precede the end of the pulse".into());
        }
        if self.pmpe.n_max < 1 {
            e.push("`pmpe.n_max` must be >= 1".into());
        }
        if self.spectral1d.start > self.spectral1d.end {
            e.push("`spectral1d.start` must not exceed `spectral1d.end`".into());
        }
        if self.output_dir.is_empty() {
            e.push("`output.dir` must not be empty".into());
        }
        e
    }

    pub fn relaxation(&self) -> RelaxationConfig {
        RelaxationConfig {
            dtau: self.ground.dtau,
            max_steps: self.ground.max_steps,
            rate_tol: self.ground.rate_tol,
            polish_dt: self.ground.polish.then_some(self.propagator.dt),
            polish_time: self.ground.polish_time,
            ..RelaxationConfig::default()
        }
    }

    /// Times at which the flow momentum is recorded during propagation.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let an = &self.analysis;
        let end = self.pulse.duration();
        let mut t = Vec::new();
        let mut k = 0usize;
        loop {
            let x = k as f64 * an.coarse_step;
            if x > end + 1e-9 {
                break;
            }
            if x < an.fine_start || x > an.fine_end {
                t.push(x);
            }
            k += 1;
        }
        let mut k = 0usize;
        loop {
            let x = an.fine_start + k as f64 * an.fine_step;
            if x > an.fine_end + 1e-9 || x > end + 1e-9 {
                break;
            }
            t.push(x);
            k += 1;
        }
        t.extend(an.wigner_times.iter().copied());
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        t.retain(|&x| x > 0.0);
        t
    }

    pub fn spectral_times(&self) -> Vec<f64> {
        let s = &self.spectral1d;
        let mut t: Vec<f64> = (0..).map(|k| s.start + k as f64 * s.step).take_while(|&x| x <= s.end + 1e-9).collect();
        t.extend(s.density_times.iter().chain(&s.current_times).copied());
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        t
    }

    /// Canonical text form. The output directory is left out: it says where a
    /// run is stored, not what was computed.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let p = &self.pulse;
        let g = &self.grid;
        let _ = writeln!(s, "[pulse]\nF = {}\nT = {}\nN = {}\nphi = {}\n", p.amplitude, p.period, p.cycles, p.cep);
        let _ = writeln!(s, "[grid]\nz_min = {}\nz_max = {}\ndz = {}\nrho_max = {}\ndrho = {}\n", g.z_min, g.z_max, g.dz, g.rho_max, g.drho);
        let _ = writeln!(s, "[propagator]\ndt = {}", self.propagator.dt);
        match self.propagator.absorber {
            Some(a) => {
                let _ = writeln!(s, "absorber = true\nabsorber_strength = {}\nabsorber_width = {}\n", a.strength, a.width_fraction);
            }
            None => {
                let _ = writeln!(s, "absorber = false\n");
            }
        }
        let gr = &self.ground;
        let _ = writeln!(
            s,
            "[ground]\ndtau = {}\nmax_steps = {}\nrate_tol = {}\npolish = {}\npolish_time = {}\n",
            gr.dtau, gr.max_steps, gr.rate_tol, gr.polish, gr.polish_time
        );
        let an = &self.analysis;
        let _ = writeln!(
            s,
            "[analysis]\nwigner_times = {}\np_min = {}\np_max = {}\np_nodes = {}\ndensity_floor = {}\nfine_start = {}\nfine_end = {}\nfine_step = {}\ncoarse_step = {}\n",
            list_string(&an.wigner_times),
            an.p_min,
            an.p_max,
            an.p_nodes,
            an.density_floor,
            an.fine_start,
            an.fine_end,
            an.fine_step,
            an.coarse_step
        );
        let sp = &self.spectral1d;
        let _ = writeln!(
            s,
            "[spectral1d]\nz_max = {}\ndz = {}\ndt = {}\nstart = {}\nend = {}\nstep = {}\ndensity_times = {}\ncurrent_times = {}\nst_width = {}\n",
            sp.z_max,
            sp.dz,
            sp.dt,
            sp.start,
            sp.end,
            sp.step,
            list_string(&sp.density_times),
            list_string(&sp.current_times),
            sp.st_width
        );
        let tr = &self.trajectories;
        let _ = writeln!(
            s,
            "[trajectories]\nstarts = {}\nsample_step = {}\nrescatter_radius = {}\n",
            list_string(&tr.starts),
            tr.sample_step,
            tr.rescatter_radius
        );
        let _ = write!(s, "[pmpe]\nn_max = {}\ntimes = {}\n", self.pmpe.n_max, list_string(&self.pmpe.times));
        s
    }
}

impl AnalysisSettings {
    fn dz_bound_violated(&self, dz: f64) -> bool {
        dz > 0.0 && self.p_min.abs().max(self.p_max.abs()) > nyquist_bound(dz) * (1.0 + 1e-12)
    }

    pub fn momentum_axis(&self) -> attoscope_core::UniformAxis {
        let step = (self.p_max - self.p_min) / (self.p_nodes - 1) as f64;
        attoscope_core::UniformAxis::new(self.p_min, step, self.p_nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::default();
        c.pulse.cep = 0.25;
        c.propagator.absorber = None;
        c.trajectories.starts = vec![150.5, 151.0];
        assert_eq!(RunConfig::parse(&c.to_canonical_string()).unwrap(), c);
    }

    #[test]
    fn snapshot_cadence() {
        let t = RunConfig::default().snapshot_times();
        assert!(t.contains(&5.0) && t.contains(&141.0) && t.contains(&330.0));
        assert!(!t.contains(&206.0) && !t.contains(&0.0));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}

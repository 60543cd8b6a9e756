//! Pipeline stages, their prerequisites and output files.

use std::path::{Path, PathBuf};

use attoscope_core::classical::{ensemble, solve_initial_condition_with, IntegratorConfig, MatchingConfig, Outcome};
use attoscope_core::io::{write_atomic, ArrayFile, AxisMeta, CsvTable};
use attoscope_core::phase_space::{
    current, current_momentum, moments, quantum_momentum, wigner, wigner_full_band, QuantumMomentumCurve, QuantumMomentumSeries, ReducedDensity1D, WignerGrid,
};
use attoscope_core::pmpe::{backpropagate_pmpe, build_pmpe, momentum_distribution, negative_momentum_residue, pmpe_wigner, separatrix_split, PmpeConfig, Stage as PmpeStage};
use attoscope_core::reconstruct::{asymptotic_momentum, reconstruct_ts, ReconstructionConfig};
use attoscope_core::spectral1d::{
    calibrate_softening, decompose_packets, energy_distribution, exit_window, instantaneous_spectrum, max_abs_in, packet_currents, run_1d_companion, Run1DConfig,
};
use attoscope_core::tdse::{bound_states, ground_state, propagate, Wavefunction2D};
use attoscope_core::{barrier_geometry, Error, UniformAxis};

use crate::config::{ConfigIssue, RunConfig};
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ground,
    Propagate,
    PhaseSpace,
    Spectral1D,
    Trajectories,
    Pmpe,
    Reconstruct,
    All,
}

impl Stage {
    pub const PIPELINE: [Stage; 7] = [Stage::Ground, Stage::Propagate, Stage::PhaseSpace, Stage::Spectral1D, Stage::Trajectories, Stage::Pmpe, Stage::Reconstruct];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ground => "ground",
            Stage::Propagate => "propagate",
            Stage::PhaseSpace => "phase-space",
            Stage::Spectral1D => "spectral1d",
            Stage::Trajectories => "trajectories",
            Stage::Pmpe => "pmpe",
            Stage::Reconstruct => "reconstruct",
            Stage::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::PIPELINE.iter().chain(&[Stage::All]).copied().find(|st| st.name() == s)
    }

    /// Stages whose outputs this one reads. `reconstruct` can take an
    /// external detection file instead of the trajectories stage.
    pub fn prerequisites(&self) -> &'static [Stage] {
        match self {
            Stage::Ground | Stage::Spectral1D | Stage::All => &[],
            Stage::Propagate => &[Stage::Ground],
            Stage::PhaseSpace | Stage::Trajectories | Stage::Pmpe => &[Stage::Propagate],
            Stage::Reconstruct => &[Stage::Propagate, Stage::Trajectories],
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigIssue>),

    #[error("stage `{stage}` is missing prerequisites:\n{}", .missing.iter().map(|m| format!("  {m}")).collect::<Vec<_>>().join("\n"))]
    MissingPrerequisite { stage: Stage, missing: Vec<String> },

    #[error("stage `{stage}` failed: {source}")]
    Numerical { stage: Stage, source: Error },

    #[error("stage `{stage}`: {message}")]
    Io { stage: Stage, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical { .. } | CliError::Io { .. } => 2,
            CliError::MissingPrerequisite { .. } => 3,
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub t_snapshots: Option<Vec<f64>>,
    pub ts_list: Option<Vec<f64>>,
    pub pd_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: Stage,
    pub lines: Vec<String>,
}

/// Configuration with the overrides applied and re-validated.
pub fn effective_config(mut cfg: RunConfig, opts: &RunOptions) -> Result<RunConfig, CliError> {
    if let Some(t) = &opts.t_snapshots {
        cfg.analysis.wigner_times = t.clone();
    }
    if let Some(t) = &opts.ts_list {
        cfg.trajectories.starts = t.clone();
    }
    if let Some(d) = &opts.out_dir {
        cfg.output_dir = d.to_string_lossy().into_owned();
    }
    let issues = cfg.validate();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(issues.into_iter().map(|message| ConfigIssue { line: None, message }).collect()))
    }
}

/// Run one stage (or the whole pipeline for [`Stage::All`]), then refresh
/// the manifest.
pub fn run(stage: Stage, cfg: RunConfig, opts: &RunOptions) -> Result<Vec<StageReport>, CliError> {
    let cfg = effective_config(cfg, opts)?;
    let out = PathBuf::from(&cfg.output_dir);
    let ctx = Context { cfg: &cfg, out: &out, pd_file: opts.pd_file.as_deref() };
    let io = |stage: Stage| move |e: std::io::Error| CliError::Io { stage, message: e.to_string() };
    std::fs::create_dir_all(&out).map_err(io(stage))?;
    write_atomic(&out.join("config.txt"), cfg.to_canonical_string().as_bytes()).map_err(|e| CliError::Io { stage, message: e.to_string() })?;
    let stages: Vec<Stage> = if stage == Stage::All { Stage::PIPELINE.to_vec() } else { vec![stage] };
    let mut reports = Vec::new();
    for st in stages {
        ctx.check_prerequisites(st)?;
        let lines = ctx.run_one(st).map_err(|source| match source {
            Error::Io(e) => CliError::Io { stage: st, message: e.to_string() },
            source => CliError::Numerical { stage: st, source },
        })?;
        Manifest::scan(&out).and_then(|m| m.write(&out)).map_err(io(st))?;
        reports.push(StageReport { stage: st, lines });
    }
    Ok(reports)
}

/// File name fragment for a time value.
pub fn time_tag(t: f64) -> String {
    format!("{}", (t * 1e6).round() / 1e6)
}

pub mod paths {
    pub const PSI0: &str = "ground/psi0.asf";
    pub const GROUND_ENERGY: &str = "ground/energy.csv";
    pub const PSI_FINAL: &str = "propagate/psi_final.asf";
    pub const Q_SERIES: &str = "propagate/q_series.csv";
    pub const OBSERVABLES: &str = "propagate/observables.csv";
    pub const PHASE_SUMMARY: &str = "phase_space/summary.csv";
    pub const ENERGY_STATS: &str = "spectral1d/energy_stats.csv";
    pub const SPECTRAL_MODEL: &str = "spectral1d/model.csv";
    pub const CURRENTS_SUMMARY: &str = "spectral1d/currents_summary.csv";
    pub const INITIAL_CONDITIONS: &str = "trajectories/initial_conditions.csv";
    pub const PATHS: &str = "trajectories/paths.csv";
    pub const DETECTIONS: &str = "trajectories/detections.csv";
    pub const PMPE_PACKET: &str = "pmpe/packet.asf";
    pub const PMPE_SUMMARY: &str = "pmpe/summary.csv";
    pub const PMPE_SEPARATRIX: &str = "pmpe/separatrix.csv";
    pub const PMPE_CONSTRUCTION: &str = "pmpe/construction.csv";
    pub const BOUND_STATES: &str = "pmpe/bound_states.csv";
    pub const RECONSTRUCTION: &str = "reconstruct/reconstruction.csv";

    pub fn psi_at(t: f64) -> String {
        format!("propagate/psi_t{}.asf", super::time_tag(t))
    }
    pub fn wigner_at(t: f64) -> String {
        format!("phase_space/wigner_t{}.asf", super::time_tag(t))
    }
    pub fn qmom_at(t: f64) -> String {
        format!("phase_space/qmom_t{}.csv", super::time_tag(t))
    }
    pub fn separatrix_at(t: f64) -> String {
        format!("phase_space/separatrix_t{}.csv", super::time_tag(t))
    }
    pub fn energy_density_at(t: f64) -> String {
        format!("spectral1d/energy_density_t{}.csv", super::time_tag(t))
    }
    pub fn currents_at(t: f64) -> String {
        format!("spectral1d/currents_t{}.csv", super::time_tag(t))
    }
    pub fn pmpe_wigner_at(t: f64) -> String {
        format!("pmpe/wigner_t{}.asf", super::time_tag(t))
    }
    pub fn pmpe_qmom_at(t: f64) -> String {
        format!("pmpe/qmom_t{}.csv", super::time_tag(t))
    }
    pub fn pmpe_momentum_at(t: f64) -> String {
        format!("pmpe/momentum_t{}.csv", super::time_tag(t))
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    pd_file: Option<&'a Path>,
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn wigner_file(w: &WignerGrid) -> attoscope_core::Result<ArrayFile> {
    Ok(ArrayFile::real(vec![w.z.len, w.p.len], vec![AxisMeta::new("z", w.z.min, w.z.step), AxisMeta::new("p", w.p.min, w.p.step)], w.values.clone())?
        .with_attribute("t", w.t)
        .with_attribute("min", w.min())
        .with_attribute("max", w.max())
        .with_attribute("imag_residue", w.max_imag_residue))
}

fn qmom_table(c: &QuantumMomentumCurve) -> CsvTable {
    let mut t = CsvTable::new(&["z", "p0", "q", "mask"]);
    for i in 0..c.z.len {
        t.push_numbers(&[c.z.at(i), c.p0[i], if c.mask[i] { c.q[i] } else { f64::NAN }, c.mask[i] as u8 as f64]);
    }
    t
}

/// Flow-momentum series stored by the propagate stage.
pub fn load_q_series(path: &Path) -> attoscope_core::Result<QuantumMomentumSeries> {
    let tab = CsvTable::load(path)?;
    let (t, z, p0, q, m) = (tab.column("t")?, tab.column("z")?, tab.column("p0")?, tab.column("q")?, tab.column("mask")?);
    let mut curves = Vec::new();
    let mut s = 0;
    while s < t.len() {
        let mut e = s;
        while e < t.len() && t[e] == t[s] {
            e += 1;
        }
        if e - s < 2 {
            return Err(Error::Format(format!("snapshot at t = {} has fewer than two nodes", t[s])));
        }
        let step = z[s + 1] - z[s];
        let mask: Vec<bool> = m[s..e].iter().map(|&x| x != 0.0).collect();
        let qv = q[s..e].iter().zip(&mask).map(|(&x, &k)| if k { x } else { 0.0 }).collect();
        curves.push(QuantumMomentumCurve { z: UniformAxis::new(z[s], step, e - s), q: qv, mask, p0: p0[s..e].to_vec(), t: t[s] });
        s = e;
    }
    Ok(QuantumMomentumSeries::new(curves))
}

impl Context<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn check_prerequisites(&self, st: Stage) -> Result<(), CliError> {
        let mut missing = Vec::new();
        let need = |rel: String, producer: Stage, missing: &mut Vec<String>| {
            if !self.path(&rel).is_file() {
                missing.push(format!("{rel} (produced by `{producer}`)"));
            }
        };
        match st {
            Stage::Propagate => {
                need(paths::PSI0.into(), Stage::Ground, &mut missing);
                if missing.is_empty() {
                    if let Ok(f) = ArrayFile::load(&self.path(paths::PSI0)).and_then(|f| f.to_wavefunction()) {
                        if !f.grid.same_as(&self.cfg.grid) {
                            missing.push(format!("{} was computed on a different grid; rerun `ground`", paths::PSI0));
                        }
                    }
                }
            }
            Stage::PhaseSpace => {
                for &t in &self.cfg.analysis.wigner_times {
                    need(paths::psi_at(t), Stage::Propagate, &mut missing);
                }
            }
            Stage::Trajectories => need(paths::Q_SERIES.into(), Stage::Propagate, &mut missing),
            Stage::Pmpe => need(paths::PSI_FINAL.into(), Stage::Propagate, &mut missing),
            Stage::Reconstruct => {
                need(paths::Q_SERIES.into(), Stage::Propagate, &mut missing);
                match self.pd_file {
                    Some(p) if !p.is_file() => missing.push(format!("detection file {} does not exist", p.display())),
                    Some(_) => {}
                    None => {
                        if !self.path(paths::DETECTIONS).is_file() {
                            missing.push(format!("{} (produced by `trajectories`) or an external file via --pd-file", paths::DETECTIONS));
                        }
                    }
                }
            }
            Stage::Ground | Stage::Spectral1D | Stage::All => {}
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::MissingPrerequisite { stage: st, missing })
        }
    }

    fn run_one(&self, st: Stage) -> attoscope_core::Result<Vec<String>> {
        match st {
            Stage::Ground => self.ground(),
            Stage::Propagate => self.propagate(),
            Stage::PhaseSpace => self.phase_space(),
            Stage::Spectral1D => self.spectral1d(),
            Stage::Trajectories => self.trajectories(),
            Stage::Pmpe => self.pmpe(),
            Stage::Reconstruct => self.reconstruct(),
            Stage::All => unreachable!("expanded by run"),
        }
    }

    fn ground(&self) -> attoscope_core::Result<Vec<String>> {
        let g = self.cfg.grid;
        let (psi, e) = ground_state(g, &self.cfg.relaxation())?;
        ArrayFile::from_wavefunction(&psi).with_attribute("energy", e).save(&self.path(paths::PSI0))?;
        let mut t = CsvTable::new(&["energy", "exact", "error", "dz", "drho", "norm"]);
        t.push_numbers(&[e, -0.5, e + 0.5, g.dz, g.drho, psi.norm_sqr()]);
        t.save(&self.path(paths::GROUND_ENERGY))?;
        Ok(vec![format!("E0 = {e:.8} (error {:+.3e}) on {}x{} nodes", e + 0.5, g.nz(), g.nr())])
    }

    fn propagate(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let mut psi = ArrayFile::load(&self.path(paths::PSI0))?.to_wavefunction()?;
        psi.t = 0.0;
        let times = cfg.snapshot_times();
        let wig = &cfg.analysis.wigner_times;
        let floor = cfg.analysis.density_floor;
        let mut q = CsvTable::new(&["t", "z", "p0", "j", "q", "mask"]);
        let mut obs = CsvTable::new(&["t", "field", "norm", "z_mean", "pz_mean"]);
        let mut saved = 0usize;
        let end = cfg.pulse.duration();
        let fin = propagate(psi, &cfg.pulse, &cfg.propagator, end, &times, |s| {
            let rho = ReducedDensity1D::reduce(s);
            let j = current(&rho);
            let c = QuantumMomentumCurve::from_moments(rho.z, rho.diagonal(), &j, s.t, floor);
            for i in 0..c.z.len {
                q.push_numbers(&[s.t, c.z.at(i), c.p0[i], j[i], if c.mask[i] { c.q[i] } else { f64::NAN }, c.mask[i] as u8 as f64]);
            }
            let n = s.norm_sqr();
            obs.push_numbers(&[s.t, cfg.pulse.field_at(s.t), n, s.expectation_z() / n, s.expectation_pz() / n]);
            if let Some(&w) = wig.iter().find(|&&w| (w - s.t).abs() < 1e-6) {
                ArrayFile::from_wavefunction(s).save(&self.path(&paths::psi_at(w)))?;
                saved += 1;
            }
            Ok(())
        })?;
        ArrayFile::from_wavefunction(&fin).save(&self.path(paths::PSI_FINAL))?;
        q.save(&self.path(paths::Q_SERIES))?;
        obs.save(&self.path(paths::OBSERVABLES))?;
        Ok(vec![format!("propagated to t = {end}; final norm {:.8}; {} flow snapshots, {saved} stored states", fin.norm_sqr(), obs.rows.len())])
    }

    fn phase_space(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let axis = cfg.analysis.momentum_axis();
        let floor = cfg.analysis.density_floor;
        let mut summary = CsvTable::new(&["t", "w_min", "w_max", "imag_residue", "position_marginal_error", "q_current_difference", "trace"]);
        let mut lines = Vec::new();
        for &t in &cfg.analysis.wigner_times {
            let psi = ArrayFile::load(&self.path(&paths::psi_at(t)))?.to_wavefunction()?;
            let rho = ReducedDensity1D::reduce(&psi);
            let w = wigner(&rho, &axis)?;
            wigner_file(&w)?.save(&self.path(&paths::wigner_at(t)))?;
            let full = wigner_full_band(&rho);
            let p0 = moments(&full, 0)?;
            let marg = p0.iter().zip(rho.diagonal()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let qw = quantum_momentum(&full, floor)?;
            let qj = current_momentum(&rho, floor);
            let dq = (0..qw.q.len()).filter(|&i| qw.mask[i]).map(|i| (qw.q[i] - qj.q[i]).abs()).fold(0.0, f64::max);
            qmom_table(&qw).save(&self.path(&paths::qmom_at(t)))?;
            let geo = barrier_geometry(psi.t, 0.0, &cfg.pulse).ok();
            let mut sep = CsvTable::new(&["z", "p"]);
            if let Some(geo) = geo {
                for i in 0..rho.z.len {
                    let z = rho.z.at(i);
                    let v = if z == 0.0 { f64::NEG_INFINITY } else { -1.0 / z.abs() + geo.field * z };
                    let k = 2.0 * (geo.v_top - v);
                    sep.push_numbers(&[z, if k >= 0.0 { k.sqrt() } else { f64::NAN }]);
                }
            }
            sep.save(&self.path(&paths::separatrix_at(t)))?;
            summary.push_numbers(&[psi.t, w.min(), w.max(), w.max_imag_residue, marg, dq, rho.trace()]);
            lines.push(format!("t = {t}: W in [{:.4e}, {:.4e}], |q_W - j/rho| <= {dq:.2e}", w.min(), w.max()));
        }
        summary.save(&self.path(paths::PHASE_SUMMARY))?;
        Ok(lines)
    }

    fn spectral1d(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let s = &cfg.spectral1d;
        let n = (2.0 * s.z_max / s.dz).round() as usize + 1;
        let model = calibrate_softening(UniformAxis::new(-s.z_max, s.dz, n), cfg.pulse, -0.5, 1e-6)?;
        let ground = attoscope_core::spectral1d::ground_state_1d(&model)?;
        let mut m = CsvTable::new(&["softening", "ground_energy", "z_max", "dz"]);
        m.push_numbers(&[model.softening, ground.1, s.z_max, s.dz]);
        m.save(&self.path(paths::SPECTRAL_MODEL))?;
        let times = cfg.spectral_times();
        let run = Run1DConfig { dt: s.dt, ..Run1DConfig::default() };
        let snaps = run_1d_companion(&model, &run, &times)?;
        let mut stats = CsvTable::new(&["t", "field", "mean", "spread", "v_top", "norm", "direct_mean", "completeness_error", "split_error", "ft_norm", "ob_norm"]);
        let mut cur_sum = CsvTable::new(&["t", "mean_energy", "window_lo", "window_hi", "max_j_ft", "max_j_st", "ratio", "st_levels", "st_weight"]);
        let mut lines = Vec::new();
        let h = s.dz;
        let norm2 = |v: &[num_complex::Complex64]| v.iter().map(|a| a.norm_sqr()).sum::<f64>() * h;
        for snap in &snaps {
            let t = snap.t;
            let spec = instantaneous_spectrum(&model, t)?;
            let dist = energy_distribution(&spec, &snap.psi);
            let nrm = norm2(&snap.psi);
            let direct = model.energy_direct(&snap.psi, t);
            let (mut split, mut ftn, mut obn) = (f64::NAN, f64::NAN, f64::NAN);
            if spec.v_top.is_some() {
                let dec = decompose_packets(&spec, &snap.psi, s.st_width)?;
                split = snap.psi.iter().zip(dec.ft.iter().zip(&dec.ob)).map(|(p, (a, b))| (p - a - b).norm()).fold(0.0, f64::max);
                ftn = norm2(&dec.ft);
                obn = norm2(&dec.ob);
                if s.current_times.iter().any(|&c| (c - t).abs() < 1e-6) {
                    let cur = packet_currents(&dec.ft, &dec.ob, &dec.st, &snap.psi, h);
                    let win = exit_window(&cfg.pulse, t, dec.mean_energy)?;
                    let jft = max_abs_in(&model.z, &cur.j_ft, win);
                    let jst = max_abs_in(&model.z, &cur.j_st, win);
                    let mut tab = CsvTable::new(&["z", "j", "j_ft", "j_ob", "j_st", "cross"]);
                    for i in 0..model.z.len {
                        tab.push_numbers(&[model.z.at(i), cur.j[i], cur.j_ft[i], cur.j_ob[i], cur.j_st[i], cur.cross[i]]);
                    }
                    tab.save(&self.path(&paths::currents_at(t)))?;
                    cur_sum.push_numbers(&[t, dec.mean_energy, win.0, win.1, jft, jst, jst / jft, dec.st_levels as f64, dec.st_weight]);
                    lines.push(format!("t = {t}: max|j_ST| / max|j_FT| = {:.3e} over z in [{:.2}, {:.2}]", jst / jft, win.0, win.1));
                }
            }
            if s.density_times.iter().any(|&c| (c - t).abs() < 1e-6) {
                CsvTable::from_columns(&["energy", "population", "density"], &[&dist.energies, &dist.populations, &dist.density]).save(&self.path(&paths::energy_density_at(t)))?;
            }
            stats.push_numbers(&[t, spec.field, dist.mean, dist.spread, nan_or(spec.v_top), nrm, direct, (dist.norm - nrm).abs(), split, ftn, obn]);
        }
        stats.save(&self.path(paths::ENERGY_STATS))?;
        cur_sum.save(&self.path(paths::CURRENTS_SUMMARY))?;
        lines.insert(0, format!("1D model softening a = {:.6}, {} instants analysed", model.softening, snaps.len()));
        Ok(lines)
    }

    fn trajectories(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let series = load_q_series(&self.path(paths::Q_SERIES))?;
        let end = cfg.pulse.duration();
        let step = cfg.trajectories.sample_step;
        let samples: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&t| t <= end + 1e-9).collect();
        let integ = IntegratorConfig { rescatter_radius: cfg.trajectories.rescatter_radius, ..IntegratorConfig::default() };
        let members = ensemble(&cfg.trajectories.starts, &series, &cfg.pulse, &samples, &MatchingConfig::default(), &integ);
        let mut ics = CsvTable::new(&["t_s", "z_i", "energy", "p_0", "residual", "outcome", "z_f", "p_f", "energy_f", "p_d"]);
        let mut path = CsvTable::new(&["t_s", "t", "z", "p", "deviation"]);
        let mut det = CsvTable::new(&["t_s", "p_d"]);
        let mut lines = Vec::new();
        for (&t_s, m) in cfg.trajectories.starts.iter().zip(members) {
            match m {
                Ok(m) => {
                    let tr = &m.trajectory;
                    let ic = tr.initial;
                    let p_d = if tr.outcome == Outcome::DirectEscape { asymptotic_momentum(tr.p_f, tr.z_f).ok() } else { None };
                    ics.push(vec![
                        fmt(t_s),
                        fmt(ic.z_i),
                        fmt(ic.energy),
                        fmt(ic.p_0),
                        fmt(ic.residual),
                        tr.outcome.as_str().into(),
                        fmt(tr.z_f),
                        fmt(tr.p_f),
                        fmt(tr.energy_f),
                        fmt(nan_or(p_d)),
                    ]);
                    path.push_numbers(&[t_s, ic.t_s, ic.z_i, ic.p_0, ic.residual.abs()]);
                    for (s, (_, dev)) in tr.samples.iter().zip(&m.deviations) {
                        path.push_numbers(&[t_s, s.t, s.z, s.p, nan_or(*dev)]);
                    }
                    if let Some(p) = p_d {
                        det.push_numbers(&[t_s, p]);
                    }
                    lines.push(format!("t_s = {t_s}: z_i = {:.4}, E = {:.5}, {} (p_f = {:.4})", ic.z_i, ic.energy, tr.outcome.as_str(), tr.p_f));
                }
                Err(e) => {
                    let nan = fmt(f64::NAN);
                    ics.push(vec![fmt(t_s), nan.clone(), nan.clone(), nan.clone(), nan.clone(), "seed-failed".into(), nan.clone(), nan.clone(), nan.clone(), nan]);
                    lines.push(format!("t_s = {t_s}: seeding failed: {e}"));
                }
            }
        }
        ics.save(&self.path(paths::INITIAL_CONDITIONS))?;
        path.save(&self.path(paths::PATHS))?;
        det.save(&self.path(paths::DETECTIONS))?;
        Ok(lines)
    }

    fn pmpe(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let fin = ArrayFile::load(&self.path(paths::PSI_FINAL))?.to_wavefunction()?;
        let relax = attoscope_core::tdse::RelaxationConfig { polish_dt: None, ..cfg.relaxation() };
        let bounds = bound_states(fin.grid, &relax, cfg.pmpe.n_max)?;
        let pops = bounds.populations(&fin)?;
        let mut bt = CsvTable::new(&["n", "l", "energy", "residual", "population"]);
        for (b, p) in bounds.states.iter().zip(&pops) {
            bt.push_numbers(&[b.n as f64, b.l as f64, b.energy, b.residual, *p]);
        }
        bt.save(&self.path(paths::BOUND_STATES))?;
        let pkt = build_pmpe(&fin, &bounds, &PmpeConfig::default())?;
        ArrayFile::from_wavefunction(&pkt.psi).save(&self.path(paths::PMPE_PACKET))?;
        let mut ct = CsvTable::new(&["stage", "iteration", "norm_removed"]);
        for s in &pkt.stages {
            let name = match s.stage {
                PmpeStage::BoundSubtraction => "bound-subtraction",
                PmpeStage::MomentumFilter => "momentum-filter",
                PmpeStage::Intersection => "intersection",
            };
            ct.push(vec![name.into(), s.iteration.to_string(), fmt(s.norm_removed)]);
        }
        ct.save(&self.path(paths::PMPE_CONSTRUCTION))?;
        let twice = build_pmpe(&pkt.psi, &bounds, &PmpeConfig::default())?;
        let idem = pkt.psi.values.iter().zip(&twice.psi.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let residue = negative_momentum_residue(&pkt.psi);
        let mut sm = CsvTable::new(&["t", "norm", "bound_overlap", "negative_momentum_residue", "idempotence_error"]);
        sm.push_numbers(&[pkt.psi.t, pkt.norm(), pkt.bound_overlap, residue, idem]);
        sm.save(&self.path(paths::PMPE_SUMMARY))?;
        let momentum = |psi: &Wavefunction2D, t: f64| -> attoscope_core::Result<()> {
            let (p, n) = momentum_distribution(psi);
            CsvTable::from_columns(&["p", "density"], &[&p.values(), &n]).save(&self.path(&paths::pmpe_momentum_at(t)))
        };
        momentum(&pkt.psi, pkt.psi.t)?;
        let snaps = backpropagate_pmpe(&pkt, &cfg.pulse, &cfg.propagator, &cfg.pmpe.times)?;
        let mut sep = CsvTable::new(&["t", "norm", "v_top", "below", "above", "below_fraction", "above_fraction", "w_min"]);
        let mut lines = vec![format!(
            "PMPE norm {:.6e} (n_max = {}), bound overlap {:.1e}, p_z <= 0 residue {:.1e}",
            pkt.norm(),
            cfg.pmpe.n_max,
            pkt.bound_overlap,
            residue
        )];
        for (&t, s) in cfg.pmpe.times.iter().zip(&snaps) {
            let (w, q) = pmpe_wigner(s)?;
            wigner_file(&w)?.save(&self.path(&paths::pmpe_wigner_at(t)))?;
            qmom_table(&q).save(&self.path(&paths::pmpe_qmom_at(t)))?;
            momentum(s, t)?;
            let sp = separatrix_split(&w, &cfg.pulse)?;
            sep.push_numbers(&[s.t, s.norm_sqr(), sp.v_top, sp.below, sp.above, sp.below_fraction(), sp.above_fraction(), w.min()]);
            lines.push(format!("t = {t}: {:.1}% below / {:.1}% above the separatrix", 100.0 * sp.below_fraction(), 100.0 * sp.above_fraction()));
        }
        sep.save(&self.path(paths::PMPE_SEPARATRIX))?;
        Ok(lines)
    }

    fn reconstruct(&self) -> attoscope_core::Result<Vec<String>> {
        let cfg = self.cfg;
        let series = load_q_series(&self.path(paths::Q_SERIES))?;
        let source = match self.pd_file {
            Some(p) => p.to_path_buf(),
            None => self.path(paths::DETECTIONS),
        };
        let tab = CsvTable::load(&source)?;
        let p_d = tab.column("p_d")?;
        let t_s = tab.column("t_s").unwrap_or_else(|_| vec![f64::NAN; p_d.len()]);
        let mc = MatchingConfig::default();
        let rc = ReconstructionConfig::for_pulse(&cfg.pulse);
        let mut out = CsvTable::new(&["t_s", "p_d", "t_s_r", "error", "z_0", "p_0", "p_f_nc", "iterations", "residual", "status"]);
        let mut lines = Vec::new();
        for (&ts, &pd) in t_s.iter().zip(&p_d) {
            let r = reconstruct_ts(pd, &cfg.pulse, |t| solve_initial_condition_with(t, |z| series.value_at(z, t), &cfg.pulse, &mc), &rc);
            match r {
                Ok(r) => {
                    out.push(vec![
                        fmt(ts),
                        fmt(pd),
                        fmt(r.t_s),
                        fmt(r.t_s - ts),
                        fmt(r.z_0),
                        fmt(r.p_0),
                        fmt(r.p_f_nc),
                        r.iterations.to_string(),
                        fmt(r.residual),
                        "ok".into(),
                    ]);
                    lines.push(format!("p_d = {pd:.5}: t_s^R = {:.3} (t_s = {ts})", r.t_s));
                }
                Err(e) => {
                    let nan = fmt(f64::NAN);
                    out.push(vec![fmt(ts), fmt(pd), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan.clone(), "0".into(), nan, "failed".into()]);
                    lines.push(format!("p_d = {pd:.5}: reconstruction failed: {e}"));
                }
            }
        }
        out.save(&self.path(paths::RECONSTRUCTION))?;
        Ok(lines)
    }
}

//! Experiment configuration files (TOML) and built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statsol::linalg::GmresConfig;
use statsol::mc::ExperimentKind;
use statsol::mesh::Rect;
use statsol::solver::{SchurApprox, SolverConfig, VelocityApprox};
use statsol::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub observables: ObservablesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub kind: ExperimentKind,
    pub domain: Rect,
    pub reynolds: f64,
    pub final_time: f64,
    pub steps: usize,
    pub samples: usize,
    pub base_seed: u64,
    /// 0 lets the pool pick.
    #[serde(default)]
    pub workers: usize,
    pub output: PathBuf,
    /// Table the (resolution, steps, samples) triple must appear in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Uniform refinements applied to the base mesh.
    #[serde(default)]
    pub level: usize,
    pub source: MeshSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    UniformQuad { nx: usize, ny: usize },
    UniformTri { nx: usize, ny: usize },
    GradedChannel { h_min: f64, h_max: f64, growth: f64 },
    /// MSH 2.2 file; relative paths are resolved against the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub degree: usize,
    /// Defaults to `10 (k + 1)^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection { degree: 1, sigma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub schur: SchurApprox,
    pub velocity: VelocityApprox,
    pub preconditioned: bool,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let g = GmresConfig::default();
        SolverSection {
            schur: SchurApprox::default(),
            velocity: VelocityApprox::default(),
            preconditioned: true,
            tol: g.tol,
            restart: g.restart,
            max_iter: g.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservablesSection {
    pub statistics: bool,
    pub structure: StructureSection,
    pub wasserstein: WassersteinSection,
}

impl Default for ObservablesSection {
    fn default() -> Self {
        ObservablesSection {
            statistics: true,
            structure: StructureSection::default(),
            wasserstein: WassersteinSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureSection {
    pub enabled: bool,
    pub degrees: Vec<f64>,
    /// Empty means `h 2^j` for `j = 0..=3`.
    pub offsets: Vec<f64>,
}

impl Default for StructureSection {
    fn default() -> Self {
        StructureSection {
            enabled: true,
            degrees: vec![1.0, 2.0, 3.0],
            offsets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WassersteinSection {
    /// Overlay cells per direction for the one-point distance.
    pub eval_grid: usize,
    /// Sampled point pairs for the two-point distance.
    pub pairs: usize,
    pub pair_seed: u64,
}

impl Default for WassersteinSection {
    fn default() -> Self {
        WassersteinSection {
            eval_grid: 16,
            pairs: 256,
            pair_seed: 0,
        }
    }
}

/// Declared (resolution, steps, samples) tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    CavityDesk,
    CavityFull,
    ChannelDesk,
    ChannelFull,
}

/// One schedule row: cavity rows are keyed by cells per side, channel rows
/// by refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleRow {
    pub key: usize,
    pub steps: usize,
    pub samples: usize,
}

const fn row(key: usize, steps: usize, samples: usize) -> ScheduleRow {
    ScheduleRow { key, steps, samples }
}

const CAVITY_DESK: [ScheduleRow; 4] = [row(8, 25, 4), row(16, 50, 8), row(32, 100, 16), row(64, 200, 32)];
const CAVITY_FULL: [ScheduleRow; 5] = [
    row(32, 100, 32),
    row(64, 200, 64),
    row(128, 400, 128),
    row(256, 800, 256),
    row(512, 1600, 512),
];
const CHANNEL_DESK: [ScheduleRow; 2] = [row(0, 400, 4), row(1, 800, 8)];
const CHANNEL_FULL: [ScheduleRow; 4] = [row(0, 400, 60), row(1, 800, 120), row(2, 1600, 240), row(3, 2500, 480)];

/// Base channel mesh grading at desk scale.
const CHANNEL_DESK_MESH: MeshSource = MeshSource::GradedChannel {
    h_min: 0.04,
    h_max: 0.125,
    growth: 1.4,
};
/// Level 0 at full scale; one refinement gives spacings 0.0015 to 0.013.
const CHANNEL_FULL_MESH: MeshSource = MeshSource::GradedChannel {
    h_min: 0.003,
    h_max: 0.026,
    growth: 1.1,
};

impl Schedule {
    pub fn rows(self) -> &'static [ScheduleRow] {
        match self {
            Schedule::CavityDesk => &CAVITY_DESK,
            Schedule::CavityFull => &CAVITY_FULL,
            Schedule::ChannelDesk => &CHANNEL_DESK,
            Schedule::ChannelFull => &CHANNEL_FULL,
        }
    }

    pub fn kind(self) -> ExperimentKind {
        match self {
            Schedule::CavityDesk | Schedule::CavityFull => ExperimentKind::LidDrivenCavity,
            Schedule::ChannelDesk | Schedule::ChannelFull => ExperimentKind::ChannelFlow,
        }
    }

    pub fn is_full_scale(self) -> bool {
        matches!(self, Schedule::CavityFull | Schedule::ChannelFull)
    }

    pub fn row(self, key: usize) -> Option<ScheduleRow> {
        self.rows().iter().copied().find(|r| r.key == key)
    }

    fn label(self) -> &'static str {
        match self {
            Schedule::CavityDesk => "cavity",
            Schedule::CavityFull => "cavity-full",
            Schedule::ChannelDesk => "channel",
            Schedule::ChannelFull => "channel-full",
        }
    }
}

/// A named built-in configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub long_running: bool,
    pub config: ExperimentConfig,
}

/// Every built-in preset, desk scale first.
pub fn presets() -> Vec<Preset> {
    let mut out = Vec::new();
    for schedule in [Schedule::CavityDesk, Schedule::ChannelDesk, Schedule::CavityFull, Schedule::ChannelFull] {
        for r in schedule.rows() {
            let name = format!("{}-{}", schedule.label(), r.key);
            let config = match schedule.kind() {
                ExperimentKind::LidDrivenCavity => cavity_config(&name, r.key, r.steps, r.samples),
                ExperimentKind::ChannelFlow => {
                    let base = if schedule.is_full_scale() { CHANNEL_FULL_MESH } else { CHANNEL_DESK_MESH };
                    channel_config(&name, base, r.key, r.steps, r.samples)
                }
            };
            let mut config = config;
            config.experiment.schedule = Some(schedule);
            out.push(Preset {
                name,
                long_running: schedule.is_full_scale(),
                config,
            });
        }
    }
    out
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.config)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
}

/// Lid-driven cavity at Re 3200 on an `n x n` quad mesh, T = 1.
pub fn cavity_config(name: &str, n: usize, steps: usize, samples: usize) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentSection {
            name: name.to_string(),
            kind: ExperimentKind::LidDrivenCavity,
            domain: Rect::unit(),
            reynolds: 3200.0,
            final_time: 1.0,
            steps,
            samples,
            base_seed: 2024,
            workers: 0,
            output: PathBuf::from("runs").join(name),
            schedule: None,
        },
        mesh: MeshSection {
            level: 0,
            source: MeshSource::UniformQuad { nx: n, ny: n },
        },
        discretization: DiscretizationSection::default(),
        solver: SolverSection::default(),
        observables: ObservablesSection::default(),
    }
}

/// Channel flow at Re 1600 on `(0, 1.5) x (0, 0.5)`, T = 0.8.
pub fn channel_config(name: &str, base: MeshSource, level: usize, steps: usize, samples: usize) -> ExperimentConfig {
    let mut cfg = cavity_config(name, 1, steps, samples);
    cfg.experiment.kind = ExperimentKind::ChannelFlow;
    cfg.experiment.domain = Rect {
        x0: 0.0,
        x1: 1.5,
        y0: 0.0,
        y1: 0.5,
    };
    cfg.experiment.reynolds = 1600.0;
    cfg.experiment.final_time = 0.8;
    cfg.mesh = MeshSection { level, source: base };
    cfg
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; a relative mesh file path is
    /// made relative to the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let MeshSource::File { path: mesh } = &mut cfg.mesh.source {
            if mesh.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh = dir.join(&*mesh);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let e = &self.experiment;
        if e.name.is_empty() {
            return bad("experiment name must not be empty".into());
        }
        Rect::new(e.domain.x0, e.domain.x1, e.domain.y0, e.domain.y1).map_err(|err| Error::Config(err.to_string()))?;
        for (what, v) in [("reynolds", e.reynolds), ("final_time", e.final_time)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{what} must be positive, got {v}"));
            }
        }
        if e.steps == 0 || e.samples == 0 {
            return bad("steps and samples must be positive".into());
        }
        match e.kind {
            ExperimentKind::LidDrivenCavity if e.domain != Rect::unit() => {
                return bad("the lid-driven cavity lives on the unit square".into());
            }
            ExperimentKind::ChannelFlow if e.domain.y0 != 0.0 => {
                return bad("the channel profile assumes the bottom wall at x2 = 0".into());
            }
            _ => {}
        }
        match &self.mesh.source {
            MeshSource::UniformQuad { nx, ny } | MeshSource::UniformTri { nx, ny } if *nx == 0 || *ny == 0 => {
                return bad("mesh dimensions must be positive".into());
            }
            MeshSource::GradedChannel { h_min, h_max, growth } if !(*h_min > 0.0 && h_max >= h_min && *growth > 1.0) => {
                return bad("graded mesh needs 0 < h_min <= h_max and growth > 1".into());
            }
            _ => {}
        }
        let d = &self.discretization;
        if d.degree > 1 {
            return bad(format!("degree {} unsupported; use 0 or 1", d.degree));
        }
        if let Some(s) = d.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        self.solver_config()?;
        let st = &self.observables.structure;
        if st.degrees.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return bad("structure-function degrees must be positive".into());
        }
        if st.offsets.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return bad("structure-function offsets must be positive".into());
        }
        let w = &self.observables.wasserstein;
        if w.eval_grid == 0 || w.pairs == 0 {
            return bad("Wasserstein point budgets must be positive".into());
        }
        if let Some(schedule) = e.schedule {
            self.check_schedule(schedule)?;
        }
        Ok(())
    }

    fn check_schedule(&self, schedule: Schedule) -> Result<()> {
        let e = &self.experiment;
        if schedule.kind() != e.kind {
            return Err(Error::Config(format!("schedule {schedule:?} is for {}", schedule.kind().as_str())));
        }
        let key = match (e.kind, &self.mesh.source) {
            (ExperimentKind::LidDrivenCavity, MeshSource::UniformQuad { nx, ny }) if nx == ny => nx << self.mesh.level,
            (ExperimentKind::LidDrivenCavity, _) => {
                return Err(Error::Config("cavity schedules need a square uniform quad mesh".into()));
            }
            (ExperimentKind::ChannelFlow, _) => self.mesh.level,
        };
        match schedule.row(key) {
            Some(r) if r.steps == e.steps && r.samples == e.samples => Ok(()),
            Some(r) => Err(Error::Config(format!(
                "schedule {schedule:?} prescribes {} steps and {} samples at {key}, got {} and {}",
                r.steps, r.samples, e.steps, e.samples
            ))),
            None => Err(Error::Config(format!("schedule {schedule:?} has no row for {key}"))),
        }
    }

    /// Viscosity: `1/Re` for the cavity, `L/Re` with `L` the channel height.
    pub fn viscosity(&self) -> f64 {
        let e = &self.experiment;
        match e.kind {
            ExperimentKind::LidDrivenCavity => 1.0 / e.reynolds,
            ExperimentKind::ChannelFlow => e.domain.height() / e.reynolds,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.discretization
            .sigma
            .unwrap_or_else(|| statsol::assembly::default_sigma(self.discretization.degree))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.experiment.final_time, self.experiment.steps)
            .map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.solver;
        cfg.gmres = GmresConfig {
            tol: s.tol,
            restart: s.restart,
            max_iter: s.max_iter,
        };
        cfg.schur = s.schur;
        cfg.velocity = s.velocity;
        cfg.preconditioned = s.preconditioned;
        cfg.zero_mean_pressure = self.experiment.kind == ExperimentKind::LidDrivenCavity;
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

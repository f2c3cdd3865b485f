//! Monte Carlo sampling of the random initial/boundary data, per-sample
//! evolution and the resulting ensemble (empirical measure).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{zero_field, FormContext, VectorField};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::solver::NavierStokes;
use crate::spaces::{l2_project_velocity_with, FieldCoefficients, VelocitySpace};

/// Initial velocity of one sample.
pub type InitialField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Scrambled 64-bit seed of sample `m`; injective in `m` for a fixed base.
pub fn sample_seed(base_seed: u64, m: usize) -> u64 {
    let mut z = base_seed.wrapping_add((m as u64).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LidDrivenCavity,
    ChannelFlow,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::LidDrivenCavity => "lid_driven_cavity",
            ExperimentKind::ChannelFlow => "channel_flow",
        }
    }
}

/// Law of the random initial data.
///
/// `channel_height` and `u_max` are read only for the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub kind: ExperimentKind,
    pub gamma1: f64,
    pub gamma2: f64,
    pub modes: usize,
    pub base_seed: u64,
    pub channel_height: f64,
    pub u_max: f64,
}

impl RandomFieldSpec {
    pub fn lid_driven(base_seed: u64) -> Self {
        RandomFieldSpec {
            kind: ExperimentKind::LidDrivenCavity,
            gamma1: 0.025,
            gamma2: 0.01,
            modes: 11,
            base_seed,
            channel_height: 0.5,
            u_max: 1.5,
        }
    }

    pub fn channel(base_seed: u64) -> Self {
        RandomFieldSpec {
            kind: ExperimentKind::ChannelFlow,
            gamma1: 0.025,
            gamma2: 0.025,
            modes: 10,
            base_seed,
            channel_height: 0.5,
            u_max: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma1.is_finite() || !self.gamma2.is_finite() {
            return Err(Error::invalid("perturbation amplitudes must be finite"));
        }
        match self.kind {
            ExperimentKind::LidDrivenCavity if self.modes % 2 == 0 => Err(Error::invalid(format!(
                "lid-driven cavity needs an odd mode count, got {}",
                self.modes
            ))),
            ExperimentKind::ChannelFlow if self.modes % 2 == 1 => Err(Error::invalid(format!(
                "channel flow needs an even mode count, got {}",
                self.modes
            ))),
            ExperimentKind::ChannelFlow if !(self.channel_height > 0.0 && self.u_max.is_finite()) => {
                Err(Error::invalid("channel height must be positive and u_max finite"))
            }
            _ => Ok(()),
        }
    }

    /// Number of uniform variables per sample.
    pub fn n_variables(&self) -> usize {
        match self.kind {
            ExperimentKind::LidDrivenCavity => self.modes + 1,
            ExperimentKind::ChannelFlow => self.modes + 2,
        }
    }
}

/// The random variables of sample `m`: `Y_j` is the `j`-th draw of the
/// sample's own stream.
pub fn sample_variables(spec: &RandomFieldSpec, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(spec.base_seed, m));
    (0..spec.n_variables()).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// One realization of the random data.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub m: usize,
    pub seed: u64,
    pub variables: Vec<f64>,
    spec: RandomFieldSpec,
}

impl SampleDraw {
    pub fn new(spec: &RandomFieldSpec, m: usize) -> Result<Self> {
        spec.validate()?;
        Ok(SampleDraw {
            m,
            seed: sample_seed(spec.base_seed, m),
            variables: sample_variables(spec, m),
            spec: spec.clone(),
        })
    }

    /// Draw with prescribed variables, bypassing the generator.
    pub fn with_variables(spec: &RandomFieldSpec, m: usize, variables: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if variables.len() != spec.n_variables() {
            return Err(Error::invalid(format!(
                "expected {} random variables, got {}",
                spec.n_variables(),
                variables.len()
            )));
        }
        Ok(SampleDraw {
            m,
            seed: sample_seed(spec.base_seed, m),
            variables,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &RandomFieldSpec {
        &self.spec
    }

    /// Coordinate perturbation of the cavity.
    pub fn cavity_map(&self, x: [f64; 2]) -> [f64; 2] {
        let y = &self.variables;
        let g = self.spec.gamma1;
        let tau = 2.0 * std::f64::consts::PI;
        let mut f = x;
        for k in 0..=(self.spec.modes - 1) / 2 {
            let kf = k as f64;
            f[0] += g * y[2 * k] * (tau * kf * (x[0] - 0.5 + y[2 * k + 1])).sin();
            f[1] += g * y[2 * k + 1] * (tau * kf * (x[1] - 0.5 + y[2 * k])).sin();
        }
        f
    }

    pub fn lid_speed(&self) -> f64 {
        let yk = self.variables[self.spec.modes];
        1.0 + self.spec.gamma2 * (2.0 * std::f64::consts::PI * yk).sin()
    }

    /// Scalar perturbation of the channel profile.
    pub fn channel_perturbation(&self, x2: f64) -> f64 {
        let y = &self.variables;
        let tau = 2.0 * std::f64::consts::PI;
        (0..=self.spec.modes / 2)
            .map(|k| y[2 * k] * (tau * k as f64 * (x2 + y[2 * k + 1])).sin())
            .sum()
    }

    pub fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match self.spec.kind {
            ExperimentKind::LidDrivenCavity => {
                let f = self.cavity_map(x);
                [f[1] - 0.5, -(f[0] - 0.5)]
            }
            ExperimentKind::ChannelFlow => {
                let l = self.spec.channel_height;
                let bump = x[1] * (l - x[1]) / (l * l);
                let f = self.channel_perturbation(x[1]);
                [
                    (1.0 + self.spec.gamma1 * f) * 4.0 * self.spec.u_max * bump,
                    self.spec.gamma2 * f * bump,
                ]
            }
        }
    }

    /// Dirichlet data: the lid on `x2 = 1` for the cavity, the initial field
    /// (zero on the walls) for the channel.
    pub fn boundary_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match self.spec.kind {
            ExperimentKind::LidDrivenCavity => {
                if (x[1] - 1.0).abs() <= 1e-12 {
                    [self.lid_speed(), 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
            ExperimentKind::ChannelFlow => self.initial_velocity(x),
        }
    }

    pub fn initial_field(&self) -> InitialField {
        let draw = self.clone();
        Arc::new(move |x| draw.initial_velocity(x))
    }

    pub fn boundary_field(&self) -> VectorField {
        let draw = self.clone();
        Arc::new(move |x, _t| draw.boundary_velocity(x))
    }
}

/// Initial velocity and lid data of cavity sample `m`.
pub fn draw_sample_lid_driven(spec: &RandomFieldSpec, m: usize) -> Result<(InitialField, VectorField)> {
    if spec.kind != ExperimentKind::LidDrivenCavity {
        return Err(Error::invalid("spec does not describe a lid-driven cavity"));
    }
    let d = SampleDraw::new(spec, m)?;
    Ok((d.initial_field(), d.boundary_field()))
}

/// Initial velocity and inflow data of channel sample `m`.
pub fn draw_sample_channel(spec: &RandomFieldSpec, m: usize) -> Result<(InitialField, VectorField)> {
    if spec.kind != ExperimentKind::ChannelFlow {
        return Err(Error::invalid("spec does not describe a channel flow"));
    }
    let d = SampleDraw::new(spec, m)?;
    Ok((d.initial_field(), d.boundary_field()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub m: usize,
    pub seed: u64,
    pub field: FieldCoefficients,
}

/// Final-time velocity fields of all samples, ordered by sample index.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub space: Arc<VelocitySpace>,
    pub time: f64,
    pub members: Vec<Member>,
}

impl Ensemble {
    pub fn new(space: Arc<VelocitySpace>, time: f64, members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one member"));
        }
        let tag = space.tag();
        for mem in &members {
            if mem.field.tag != tag {
                return Err(Error::contract(format!("member {} belongs to a different space", mem.m)));
            }
            if mem.field.time.to_bits() != time.to_bits() {
                return Err(Error::contract(format!(
                    "member {} is at time {} instead of {time}",
                    mem.m, mem.field.time
                )));
            }
        }
        let mut seeds: Vec<u64> = members.iter().map(|m| m.seed).collect();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("member seeds are not pairwise distinct"));
        }
        Ok(Ensemble { space, time, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fields(&self) -> impl Iterator<Item = &FieldCoefficients> {
        self.members.iter().map(|m| &m.field)
    }

    /// Writes one field CSV per member plus `manifest.csv` into `dir`;
    /// returns the written paths, manifest last.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.len() + 1);
        let mut rows = Vec::with_capacity(self.len());
        for mem in &self.members {
            let name = format!("sample_{:05}.csv", mem.m);
            let path = dir.join(&name);
            mem.field.write_csv(&path)?;
            written.push(path);
            rows.push(ManifestRow {
                m: mem.m,
                seed: mem.seed,
                field_file: name,
                time: self.time,
                mesh_checksum: mem.field.tag.mesh_checksum.clone(),
            });
        }
        let manifest = dir.join(MANIFEST_NAME);
        write_manifest(&manifest, &rows)?;
        written.push(manifest);
        Ok(written)
    }

    /// Loads the ensemble listed in a manifest; field paths are relative to
    /// the manifest's directory.
    pub fn read(manifest: impl AsRef<Path>, space: Arc<VelocitySpace>) -> Result<Self> {
        let manifest = manifest.as_ref();
        let rows = read_manifest(manifest)?;
        let Some(first) = rows.first() else {
            return Err(Error::invalid(format!("{} lists no samples", manifest.display())));
        };
        let base = manifest.parent().unwrap_or_else(|| Path::new("."));
        let checksum = space.mesh().checksum().to_string();
        let mut members = Vec::with_capacity(rows.len());
        for row in &rows {
            if row.mesh_checksum != checksum {
                return Err(Error::contract(format!(
                    "sample {} was computed on mesh {} but the space uses {}",
                    row.m, row.mesh_checksum, checksum
                )));
            }
            let field = FieldCoefficients::read_csv(base.join(&row.field_file))?;
            members.push(Member {
                m: row.m,
                seed: row.seed,
                field,
            });
        }
        Ensemble::new(space, first.time, members)
    }
}

pub const MANIFEST_NAME: &str = "manifest.csv";
const MANIFEST_HEADER: &str = "m,seed,field_file,time,mesh_checksum";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub m: usize,
    pub seed: u64,
    pub field_file: String,
    pub time: f64,
    pub mesh_checksum: String,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:e},{}", r.m, r.seed, r.field_file, r.time, r.mesh_checksum);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<ManifestRow>> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        Some((i, h)) => return Err(perr(i + 1, format!("expected header `{MANIFEST_HEADER}`, found `{h}`"))),
        None => return Err(perr(1, "empty manifest".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let parts: Vec<&str> = line.trim().split(',').collect();
        let [m, seed, file, time, checksum] = parts.as_slice() else {
            return Err(perr(ln, format!("expected 5 columns, found {}", parts.len())));
        };
        rows.push(ManifestRow {
            m: m.parse().map_err(|_| perr(ln, format!("invalid sample index `{m}`")))?,
            seed: seed.parse().map_err(|_| perr(ln, format!("invalid seed `{seed}`")))?,
            field_file: file.to_string(),
            time: time.parse().map_err(|_| perr(ln, format!("invalid time `{time}`")))?,
            mesh_checksum: checksum.to_string(),
        });
    }
    Ok(rows)
}

/// Projected initial field of one draw on the solver's velocity space.
pub fn project_initial(solver: &NavierStokes, draw: &SampleDraw) -> Result<FieldCoefficients> {
    let g = draw.boundary_field();
    l2_project_velocity_with(
        &|x| draw.initial_velocity(x),
        &|x| g(x, 0.0),
        solver.velocity_space(),
        solver.mass(),
    )
}

/// Evolves sample `m` with its own boundary data on the shared discretization.
pub fn run_sample(solver: &NavierStokes, spec: &RandomFieldSpec, m: usize) -> Result<Member> {
    let wrap = |step: usize, e: Error| Error::Sample {
        sample: m,
        step,
        source: Box::new(e),
    };
    let draw = SampleDraw::new(spec, m)?;
    let base = solver.context();
    let ctx = FormContext::new(base.nu, base.sigma, draw.boundary_field(), zero_field()).map_err(|e| wrap(0, e))?;
    let sample_solver = solver.with_context(ctx).map_err(|e| wrap(0, e))?;
    let u0 = project_initial(&sample_solver, &draw).map_err(|e| wrap(0, e))?;
    let state = sample_solver.evolve(u0).map_err(|e| match e {
        Error::Step { step, source } => wrap(step, *source),
        other => wrap(0, other),
    })?;
    log::debug!("sample {m} done, {} GMRES iterations", state.iterations);
    Ok(Member {
        m,
        seed: draw.seed,
        field: state.velocity,
    })
}

/// Draws `samples` realizations, evolves each to the final time and collects
/// the ensemble in sample order.
pub fn run_monte_carlo(solver: &NavierStokes, spec: &RandomFieldSpec, samples: usize, exec: Exec) -> Result<Ensemble> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    spec.validate()?;
    let members = exec.try_map(samples, |m| run_sample(solver, spec, m))?;
    Ensemble::new(solver.velocity_space().clone(), solver.config().final_time(), members)
}

#[cfg(test)]
mod tests;

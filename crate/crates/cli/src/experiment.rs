//! End-to-end runs: sample, evolve, store, post-process; and comparison of
//! stored runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use statsol::assembly::FormContext;
use statsol::mc::{run_monte_carlo, Ensemble, ExperimentKind, RandomFieldSpec, MANIFEST_NAME};
use statsol::mesh::{
    classify_faces, generate_graded_channel_mesh, generate_uniform_quad_mesh, generate_uniform_tri_mesh,
    load_gmsh_mesh, uniform_refine, BoundarySpec, Mesh2D, Rect,
};
use statsol::observables::{
    cauchy_error, element_average, ensemble_mean, ensemble_variance, structure_function_curve,
    wasserstein_distances, write_element_statistics_csv, write_structure_csv, write_value_table, EvalPoints,
    PairPoints, StructureFunctionResult, WassersteinResult,
};
use statsol::par::Exec;
use statsol::solver::NavierStokes;
use statsol::spaces::{PressureSpace, VelocitySpace};
use statsol::{Error, Result};

use crate::config::{ExperimentConfig, MeshSource, WassersteinSection};

pub const CONFIG_FILE: &str = "config.toml";
pub const RUN_MANIFEST: &str = "run_manifest.csv";
pub const STALE_MARKER: &str = "STALE";
pub const ENSEMBLE_DIR: &str = "ensemble";
pub const STATISTICS_FILE: &str = "statistics.csv";
pub const ELEMENT_STATISTICS_FILE: &str = "element_statistics.csv";
pub const STRUCTURE_FILE: &str = "structure.csv";

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn build_mesh(cfg: &ExperimentConfig) -> Result<Mesh2D> {
    let domain = cfg.experiment.domain;
    let mut mesh = match &cfg.mesh.source {
        MeshSource::UniformQuad { nx, ny } => generate_uniform_quad_mesh(*nx, *ny, domain)?,
        MeshSource::UniformTri { nx, ny } => generate_uniform_tri_mesh(*nx, *ny, domain)?,
        MeshSource::GradedChannel { h_min, h_max, growth } => {
            generate_graded_channel_mesh(domain, *h_min, *h_max, *growth)?
        }
        MeshSource::File { path } => load_gmsh_mesh(path)?,
    };
    for _ in 0..cfg.mesh.level {
        mesh = uniform_refine(&mesh)?;
    }
    let bb = mesh.bounding_box();
    let tol = 1e-9 * (domain.width() + domain.height());
    if (bb.x0 - domain.x0).abs() > tol
        || (bb.x1 - domain.x1).abs() > tol
        || (bb.y0 - domain.y0).abs() > tol
        || (bb.y1 - domain.y1).abs() > tol
    {
        return Err(Error::Config(format!(
            "mesh spans ({}, {}) x ({}, {}), not the configured domain",
            bb.x0, bb.x1, bb.y0, bb.y1
        )));
    }
    Ok(mesh)
}

fn boundary_spec(cfg: &ExperimentConfig) -> BoundarySpec {
    match cfg.experiment.kind {
        ExperimentKind::LidDrivenCavity => BoundarySpec::all_dirichlet(cfg.experiment.domain),
        ExperimentKind::ChannelFlow => BoundarySpec::channel(cfg.experiment.domain),
    }
}

pub fn build_velocity_space(cfg: &ExperimentConfig, mesh: Arc<Mesh2D>) -> Result<VelocitySpace> {
    let sets = classify_faces(&mesh, &boundary_spec(cfg))?;
    VelocitySpace::new(mesh, cfg.discretization.degree, sets)
}

pub fn random_field(cfg: &ExperimentConfig) -> RandomFieldSpec {
    let seed = cfg.experiment.base_seed;
    match cfg.experiment.kind {
        ExperimentKind::LidDrivenCavity => RandomFieldSpec::lid_driven(seed),
        ExperimentKind::ChannelFlow => RandomFieldSpec {
            channel_height: cfg.experiment.domain.height(),
            ..RandomFieldSpec::channel(seed)
        },
    }
}

/// Solver for the configured discretization with homogeneous data; each
/// sample swaps in its own boundary data.
pub fn build_solver(cfg: &ExperimentConfig, mesh: Arc<Mesh2D>) -> Result<NavierStokes> {
    let vspace = Arc::new(build_velocity_space(cfg, mesh.clone())?);
    let zero_mean = cfg.experiment.kind == ExperimentKind::LidDrivenCavity;
    let pspace = Arc::new(PressureSpace::new(mesh, cfg.discretization.degree, zero_mean)?);
    let ctx = FormContext::homogeneous(cfg.viscosity(), cfg.sigma())?;
    NavierStokes::new(vspace, pspace, ctx, cfg.solver_config()?)
}

/// Smallest element bounding-box side: the spacing of a uniform mesh.
pub fn mesh_spacing(mesh: &Mesh2D) -> f64 {
    (0..mesh.n_elements())
        .map(|e| {
            let v = mesh.element_vertices(e);
            let span = |k: usize| {
                let lo = v.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let hi = v.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            };
            span(0).min(span(1))
        })
        .fold(f64::INFINITY, f64::min)
}

/// `h 2^j` for `j = 0..=3`, nudged up by 1e-9 relative so centroids exactly
/// `h 2^j` apart pass the box test regardless of rounding. Offsets that would
/// leave no interior hash cell (more than a third of the shorter side) are
/// dropped.
pub fn default_offsets(mesh: &Mesh2D) -> Vec<f64> {
    let h = mesh_spacing(mesh);
    let bb = mesh.bounding_box();
    let limit = bb.width().min(bb.height()) / 3.0;
    (0..4)
        .map(|j| h * f64::from(1u32 << j) * (1.0 + 1e-9))
        .filter(|&r| r <= limit)
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs at least two distinct x".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One produced file, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

const RUN_MANIFEST_HEADER: &str = "file,bytes,sha256";

pub fn write_run_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut s = String::from(RUN_MANIFEST_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(s, "{},{},{}", e.file, e.bytes, e.sha256);
    }
    std::fs::write(path, s).map_err(io_err(path))
}

pub fn read_run_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RUN_MANIFEST_HEADER => {}
        _ => return Err(perr(1, format!("expected header `{RUN_MANIFEST_HEADER}`"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let parts: Vec<&str> = l.split(',').collect();
            let [file, bytes, sha] = parts.as_slice() else {
                return Err(perr(i + 1, format!("expected 3 columns, found {}", parts.len())));
            };
            Ok(ManifestEntry {
                file: file.to_string(),
                bytes: bytes.parse().map_err(|_| perr(i + 1, format!("invalid byte count `{bytes}`")))?,
                sha256: sha.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overrides the configured worker count.
    pub workers: Option<usize>,
    pub dry_run: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    /// Empty for a dry run.
    pub files: Vec<ManifestEntry>,
    pub elements: usize,
    pub samples: usize,
}

fn exec_for(cfg: &ExperimentConfig, workers: Option<usize>) -> Exec {
    Exec::with_workers(workers.unwrap_or(cfg.experiment.workers))
}

/// Runs the experiment and writes every output under the configured
/// directory. On failure a `STALE` marker lists what was written.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    stage("config", cfg.validate())?;
    let mesh = Arc::new(stage("mesh", build_mesh(cfg))?);
    let dir = cfg.experiment.output.clone();
    if opts.dry_run {
        return Ok(RunSummary {
            dir,
            files: Vec::new(),
            elements: mesh.n_elements(),
            samples: cfg.experiment.samples,
        });
    }
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for stale in [RUN_MANIFEST, STALE_MARKER] {
        let p = dir.join(stale);
        if p.exists() {
            std::fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    let mut written = Vec::new();
    match run_stages(cfg, mesh.clone(), &dir, exec_for(cfg, opts.workers), &mut written) {
        Ok(()) => {
            let files = written
                .iter()
                .map(|p: &PathBuf| {
                    let file = p.strip_prefix(&dir).unwrap_or(p).to_string_lossy().replace('\\', "/");
                    let bytes = std::fs::metadata(p).map_err(io_err(p))?.len();
                    Ok(ManifestEntry {
                        file,
                        bytes,
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_run_manifest(&dir.join(RUN_MANIFEST), &files)?;
            Ok(RunSummary {
                dir,
                files,
                elements: mesh.n_elements(),
                samples: cfg.experiment.samples,
            })
        }
        Err(e) => {
            let mut note = format!("run failed: {e}\npartial outputs:\n");
            for p in &written {
                let _ = writeln!(note, "{}", p.display());
            }
            let marker = dir.join(STALE_MARKER);
            if let Err(io) = std::fs::write(&marker, note) {
                log::error!("could not write {}: {io}", marker.display());
            }
            Err(e)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, mesh: Arc<Mesh2D>, dir: &Path, exec: Exec, written: &mut Vec<PathBuf>) -> Result<()> {
    let config_path = dir.join(CONFIG_FILE);
    let text = cfg.to_toml_string()?;
    std::fs::write(&config_path, text).map_err(io_err(&config_path))?;
    written.push(config_path);

    let solver = stage("setup", build_solver(cfg, mesh.clone()))?;
    log::info!(
        "{}: {} elements, {} velocity dofs, {} samples x {} steps",
        cfg.experiment.name,
        mesh.n_elements(),
        solver.velocity_space().n_dofs(),
        cfg.experiment.samples,
        cfg.experiment.steps
    );
    let ens = stage(
        "sampling",
        run_monte_carlo(&solver, &random_field(cfg), cfg.experiment.samples, exec),
    )?;
    written.extend(stage("store", ens.write(dir.join(ENSEMBLE_DIR)))?);

    if cfg.observables.statistics {
        written.extend(stage("statistics", write_statistics(&ens, dir))?);
    }
    if cfg.observables.structure.enabled {
        let res = stage("structure", structure_functions(&ens, cfg, None, None, exec))?;
        let path = dir.join(STRUCTURE_FILE);
        stage("structure", write_structure_csv(&path, &res))?;
        written.push(path);
    }
    Ok(())
}

fn write_statistics(ens: &Ensemble, dir: &Path) -> Result<Vec<PathBuf>> {
    let mean = ensemble_mean(ens);
    let variance = (ens.len() >= 2).then(|| ensemble_variance(ens)).transpose()?;
    let mut rows = vec![("mean_l2".to_string(), mean.l2_norm()?)];
    if let Some(v) = &variance {
        rows.push(("variance_l2".to_string(), v.l2_norm()?));
    }
    let table = dir.join(STATISTICS_FILE);
    write_value_table(&table, &rows)?;
    let elems = dir.join(ELEMENT_STATISTICS_FILE);
    write_element_statistics_csv(&elems, &mean, variance.as_ref())?;
    Ok(vec![table, elems])
}

/// Structure functions of the stored ensemble; `None` takes the configured
/// degrees and offsets.
pub fn structure_functions(
    ens: &Ensemble,
    cfg: &ExperimentConfig,
    degrees: Option<&[f64]>,
    offsets: Option<&[f64]>,
    exec: Exec,
) -> Result<Vec<StructureFunctionResult>> {
    let mesh = ens.space.mesh();
    let st = &cfg.observables.structure;
    let degrees = degrees.unwrap_or(&st.degrees);
    let offsets: Vec<f64> = match offsets {
        Some(o) => o.to_vec(),
        None if st.offsets.is_empty() => default_offsets(mesh),
        None => st.offsets.clone(),
    };
    if offsets.is_empty() {
        return Err(Error::InvalidArgument("the mesh is too coarse for any structure-function offset".into()));
    }
    let avg = exec.try_map(ens.len(), |m| element_average(&ens.space, &ens.members[m].field))?;
    degrees
        .iter()
        .map(|&p| structure_function_curve(cfg.experiment.domain, mesh, &avg, &offsets, p, exec))
        .collect()
}

/// A stored run: its config and final-time ensemble.
pub struct StoredRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub ensemble: Ensemble,
}

/// Opens a run directory after checking every file against the run
/// manifest.
pub fn open_run(dir: &Path) -> Result<StoredRun> {
    if dir.join(STALE_MARKER).exists() {
        return Err(Error::Contract(format!("{} holds stale outputs of a failed run", dir.display())));
    }
    for entry in read_run_manifest(&dir.join(RUN_MANIFEST))? {
        let path = dir.join(&entry.file);
        let sha = sha256_file(&path)?;
        if sha != entry.sha256 {
            return Err(Error::Contract(format!("{} does not match its manifest checksum", path.display())));
        }
    }
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let mesh = Arc::new(build_mesh(&config)?);
    let space = Arc::new(build_velocity_space(&config, mesh)?);
    let ensemble = Ensemble::read(dir.join(ENSEMBLE_DIR).join(MANIFEST_NAME), space)?;
    Ok(StoredRun {
        dir: dir.to_path_buf(),
        config,
        ensemble,
    })
}

fn domain_of(run: &StoredRun) -> Rect {
    run.config.experiment.domain
}

/// Distances between two ensembles at the shared overlay points.
pub fn ensemble_distances(a: &Ensemble, b: &Ensemble, domain: Rect, w: &WassersteinSection, exec: Exec) -> Result<WassersteinResult> {
    let eval = EvalPoints::overlay(domain, w.eval_grid, w.eval_grid)?;
    let pairs = PairPoints::sampled(&eval, w.pairs, w.pair_seed)?;
    wasserstein_distances(a, b, &eval, &pairs, exec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub mean_cauchy: f64,
    /// `None` when either run has a single sample.
    pub variance_cauchy: Option<f64>,
    pub w1: f64,
    pub w2: f64,
}

impl CompareReport {
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("mean_cauchy".to_string(), self.mean_cauchy)];
        if let Some(v) = self.variance_cauchy {
            rows.push(("variance_cauchy".to_string(), v));
        }
        rows.push(("w1".to_string(), self.w1));
        rows.push(("w2".to_string(), self.w2));
        rows
    }
}

/// Cauchy errors of mean and variance and the Wasserstein distances between
/// run `a` and the equal or finer run `b`.
pub fn compare_runs(a: &StoredRun, b: &StoredRun, exec: Exec) -> Result<CompareReport> {
    if domain_of(a) != domain_of(b) {
        return Err(Error::Contract("runs live on different domains".into()));
    }
    let (ea, eb) = (&a.ensemble, &b.ensemble);
    if eb.space.mesh().n_elements() < ea.space.mesh().n_elements() || eb.len() < ea.len() {
        return Err(Error::Contract(
            "the second run must be at equal or finer resolution with at least as many samples".into(),
        ));
    }
    compare_ensembles(ea, eb, domain_of(a), &a.config.observables.wasserstein, exec)
}

pub fn compare_ensembles(a: &Ensemble, b: &Ensemble, domain: Rect, w: &WassersteinSection, exec: Exec) -> Result<CompareReport> {
    let mean_cauchy = cauchy_error(&ensemble_mean(a), &ensemble_mean(b))?;
    let variance_cauchy = if a.len() >= 2 && b.len() >= 2 {
        Some(cauchy_error(&ensemble_variance(a)?, &ensemble_variance(b)?)?)
    } else {
        None
    };
    let d = ensemble_distances(a, b, domain, w, exec)?;
    Ok(CompareReport {
        mean_cauchy,
        variance_cauchy,
        w1: d.w1,
        w2: d.w2,
    })
}

pub fn wasserstein_between(a: &StoredRun, b: &StoredRun, w: &WassersteinSection, exec: Exec) -> Result<WassersteinResult> {
    if domain_of(a) != domain_of(b) {
        return Err(Error::Contract("runs live on different domains".into()));
    }
    ensemble_distances(&a.ensemble, &b.ensemble, domain_of(a), w, exec)
}

pub fn value_table_string(rows: &[(String, f64)]) -> String {
    let mut s = String::from("statistic,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v:e}");
    }
    s
}

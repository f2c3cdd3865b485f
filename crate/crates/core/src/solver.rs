//! Implicit-Euler time stepping of the discrete Navier-Stokes equations.
//!
//! Each step solves the saddle-point system
//!
//! ```text
//! [ K  B^T ] [ u  ]   [ M u_prev + dt l(t_n) ]
//! [ B  0   ] [ p~ ] = [ 0                    ]
//! ```
//!
//! with `K = M + dt (C(u_prev) + nu A)` and the rescaled pressure
//! `p~ = dt p`, on the free velocity DOFs. Essential normal DOFs are moved to
//! the right-hand side. The solve is restarted GMRES with an upper
//! block-triangular preconditioner.

use std::io::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_pressure_mass, Assembler, FormContext};
use crate::error::{Error, Result};
use crate::linalg::{gmres, GmresConfig, GmresStats, IdentityOp, Ilu0, LuPattern, Operator, SparseLu};
use crate::mesh::FaceSets;
use crate::sparse::{dot, Coo, Csr};
use crate::spaces::{FieldCoefficients, PressureSpace, VelocitySpace};

/// Approximation of the Schur complement `S = B K^{-1} B^T` used by the
/// preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchurApprox {
    /// `S^{-1} ~ (dt nu + h^2) M_p^{-1}`.
    ScaledMass,
    /// `S^{-1} ~ L^{-1} + dt nu M_p^{-1}` with `L = B diag(M)^{-1} B^T`.
    #[default]
    CahouetChabard,
    /// Dense `B K^{-1} B^T`; small systems only.
    Exact,
}

/// Approximate inverse of the velocity block `K` in the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VelocityApprox {
    /// Sparse direct factorization.
    Lu,
    /// Incomplete LU without fill.
    #[default]
    Ilu0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub steps: usize,
    pub gmres: GmresConfig,
    pub zero_mean_pressure: bool,
    pub schur: SchurApprox,
    /// Ignored for [`SchurApprox::Exact`], which always factors `K` exactly.
    pub velocity: VelocityApprox,
    /// Plain GMRES when false.
    pub preconditioned: bool,
}

impl SolverConfig {
    /// Uniform grid of `steps` steps on `[0, t_end]`.
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("step count must be positive"));
        }
        let cfg = SolverConfig {
            dt: t_end / steps as f64,
            steps,
            gmres: GmresConfig::default(),
            zero_mean_pressure: true,
            schur: SchurApprox::default(),
            velocity: VelocityApprox::default(),
            preconditioned: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        self.gmres.validate()
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Solver state after step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub step: usize,
    pub velocity: FieldCoefficients,
    /// Rescaled pressure `dt * p`.
    pub pressure: FieldCoefficients,
    /// Cumulative GMRES iterations.
    pub iterations: usize,
    /// Iterations and final relative residual of the last solve.
    pub last_iterations: usize,
    pub last_residual: f64,
}

impl TrajectoryState {
    pub fn time(&self) -> f64 {
        self.velocity.time
    }

    /// Physical pressure `p = p~ / dt`.
    pub fn physical_pressure(&self, dt: f64) -> Vec<f64> {
        self.pressure.coeffs.iter().map(|v| v / dt).collect()
    }
}

/// Per-step diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub l2_norm: f64,
    pub max_divergence: f64,
    pub iterations: usize,
}

pub fn write_diagnostics_csv(path: &Path, rows: &[StepDiagnostics]) -> Result<()> {
    let mut out = String::from("step,time,l2_norm,max_divergence,gmres_iterations\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{}\n",
            r.step, r.time, r.l2_norm, r.max_divergence, r.iterations
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Removes the mean of a pressure field: `p - c (b^T p) / |D|`, where `c`
/// holds the coefficients of the constant 1 and `b_i = int q_i`.
#[derive(Debug, Clone)]
pub struct MeanProjector {
    constants: Vec<f64>,
    integrals: Vec<f64>,
    area: f64,
}

impl MeanProjector {
    pub fn new(pspace: &PressureSpace, face_sets: &FaceSets) -> Result<Self> {
        if face_sets.has_outflow() {
            return Err(Error::contract(
                "mean-zero pressure requested but an outflow boundary already fixes the pressure",
            ));
        }
        Ok(MeanProjector {
            constants: pspace.constant_vector(),
            integrals: pspace.integrals(),
            area: pspace.mesh().total_area(),
        })
    }

    pub fn mean(&self, p: &[f64]) -> f64 {
        dot(&self.integrals, p) / self.area
    }

    pub fn apply(&self, p: &mut [f64]) {
        let m = self.mean(p);
        for (pi, ci) in p.iter_mut().zip(&self.constants) {
            *pi -= m * ci;
        }
    }
}

/// Positions of the free/free and free/Dirichlet blocks inside the shared
/// velocity pattern.
#[derive(Debug)]
struct Splitting {
    ff: Csr,
    ff_pos: Vec<usize>,
    fd: Csr,
    fd_pos: Vec<usize>,
}

impl Splitting {
    fn new(pattern: &Csr, free: &[usize], dir: &[usize]) -> Self {
        let mut indexed = pattern.clone();
        for (i, v) in indexed.values.iter_mut().enumerate() {
            *v = i as f64;
        }
        let take = |rows: &[usize], cols: &[usize]| {
            let sub = indexed.submatrix(rows, cols);
            let pos = sub.values.iter().map(|&v| v as usize).collect();
            (sub, pos)
        };
        let (ff, ff_pos) = take(free, free);
        let (fd, fd_pos) = take(free, dir);
        Splitting { ff, ff_pos, fd, fd_pos }
    }

    fn extract(block: &Csr, pos: &[usize], full: &Csr) -> Csr {
        let mut out = block.clone();
        for (o, &p) in out.values.iter_mut().zip(pos) {
            *o = full.values[p];
        }
        out
    }
}

/// Pinned pressure Laplacian `B diag(M)^{-1} B^T` for the Cahouet-Chabard
/// approximation.
#[derive(Debug)]
struct PressureLaplacian {
    lu: SparseLu,
    /// Pinned DOF when the operator has the constants in its kernel.
    pin: Option<usize>,
}

impl PressureLaplacian {
    fn new(div_f: &Csr, mass_diag: &[f64], singular: bool) -> Result<Self> {
        let inv: Vec<f64> = mass_diag.iter().map(|d| 1.0 / d).collect();
        let lap = div_f.gram(&inv);
        let pin = singular.then_some(0);
        let lap = match pin {
            Some(k) => {
                let mut coo = Coo::new(lap.nrows, lap.ncols);
                for r in 0..lap.nrows {
                    let (cols, vals) = lap.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        if r != k && c != k {
                            coo.push(r, c, v);
                        }
                    }
                }
                coo.push(k, k, 1.0);
                coo.to_csr()
            }
            None => lap,
        };
        Ok(PressureLaplacian {
            lu: SparseLu::new(&lap)?,
            pin,
        })
    }

    fn solve(&self, x: &mut [f64]) {
        if let Some(k) = self.pin {
            x[k] = 0.0;
        }
        self.lu.solve_in_place(x);
    }
}

/// Step-independent data shared by every sample on one discretization.
#[derive(Debug)]
struct Shared {
    assembler: Assembler,
    pspace: Arc<PressureSpace>,
    nu: f64,
    sigma: f64,
    mass: Csr,
    /// `nu * A`.
    viscous: Csr,
    div_f: Arc<Csr>,
    div_ft: Arc<Csr>,
    div_d: Csr,
    split: Splitting,
    /// Symbolic analysis of the free velocity block, built on first use.
    lu_pattern: OnceLock<LuPattern>,
    pmass_inv: Csr,
    projector: Option<MeanProjector>,
    laplacian: PressureLaplacian,
    /// Inverse diagonal of the free velocity mass block.
    lumped_inv: Vec<f64>,
    h: f64,
}

/// The discrete solution operator for one mesh, space pair and viscosity.
/// Cloning is cheap; clones share the assembled matrices.
#[derive(Clone)]
pub struct NavierStokes {
    shared: Arc<Shared>,
    ctx: FormContext,
    cfg: SolverConfig,
}

impl std::fmt::Debug for NavierStokes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NavierStokes")
            .field("n_velocity", &self.shared.assembler.space().n_dofs())
            .field("n_pressure", &self.shared.pspace.n_dofs())
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

/// The rescaled saddle-point system of one step on the free velocity DOFs.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub velocity_block: Csr,
    pub coupling: Arc<Csr>,
    coupling_t: Arc<Csr>,
    pub rhs: Vec<f64>,
    /// Essential velocity values at the new time.
    pub dirichlet_values: Vec<f64>,
}

impl SaddleSystem {
    pub fn n_velocity(&self) -> usize {
        self.velocity_block.nrows
    }

    pub fn n_pressure(&self) -> usize {
        self.coupling.nrows
    }

    pub fn shape(&self) -> (usize, usize) {
        let n = self.n_velocity() + self.n_pressure();
        (n, n)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (nv, np) = (self.n_velocity(), self.n_pressure());
        let mut d = DMatrix::zeros(nv + np, nv + np);
        let k = self.velocity_block.to_dense();
        let b = self.coupling.to_dense();
        d.view_mut((0, 0), (nv, nv)).copy_from(&k);
        d.view_mut((nv, 0), (np, nv)).copy_from(&b);
        d.view_mut((0, nv), (nv, np)).copy_from(&b.transpose());
        d
    }
}

impl Operator for SaddleSystem {
    fn dim(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nv = self.n_velocity();
        let (xu, xp) = x.split_at(nv);
        let (yu, yp) = y.split_at_mut(nv);
        self.velocity_block.matvec(xu, yu);
        self.coupling_t.matvec_add(1.0, xp, yu);
        self.coupling.matvec(xu, yp);
    }
}

enum SchurInverse<'a> {
    Scaled { scale: f64, minv: &'a Csr },
    CahouetChabard { lap: &'a PressureLaplacian, dt_nu: f64, minv: &'a Csr },
    Exact(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

enum VelocityInverse {
    Lu(SparseLu),
    Ilu(Ilu0),
}

impl VelocityInverse {
    fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            VelocityInverse::Lu(lu) => lu.solve_in_place(x),
            VelocityInverse::Ilu(ilu) => ilu.solve_in_place(x),
        }
    }
}

/// Upper block-triangular preconditioner `[A^, B^T; 0, -S^]^{-1}`.
pub struct BlockPreconditioner<'a> {
    velocity: VelocityInverse,
    coupling_t: &'a Csr,
    schur: SchurInverse<'a>,
    projector: Option<&'a MeanProjector>,
    nv: usize,
    np: usize,
}

impl std::fmt::Debug for BlockPreconditioner<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockPreconditioner")
            .field("nv", &self.nv)
            .field("np", &self.np)
            .finish_non_exhaustive()
    }
}

impl Operator for BlockPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.nv + self.np
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (xu, xp) = x.split_at(self.nv);
        let (yu, yp) = y.split_at_mut(self.nv);
        // y_p = -S^{-1} x_p
        match &self.schur {
            SchurInverse::Scaled { scale, minv } => {
                minv.matvec(xp, yp);
                yp.iter_mut().for_each(|v| *v *= -scale);
            }
            SchurInverse::CahouetChabard { lap, dt_nu, minv } => {
                let mut t = xp.to_vec();
                lap.solve(&mut t);
                minv.matvec(xp, yp);
                for (o, ti) in yp.iter_mut().zip(&t) {
                    *o = -(*o * dt_nu + ti);
                }
            }
            SchurInverse::Exact(lu) => {
                let rhs = nalgebra::DVector::from_column_slice(xp);
                let sol = lu.solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(self.np));
                for (o, s) in yp.iter_mut().zip(sol.iter()) {
                    *o = -s;
                }
            }
        }
        if let Some(p) = self.projector {
            p.apply(yp);
        }
        // A^ y_u = x_u - B^T y_p
        yu.copy_from_slice(xu);
        self.coupling_t.matvec_add(-1.0, yp, yu);
        self.velocity.solve_in_place(yu);
    }
}

fn relative_residual(sys: &SaddleSystem, x: &[f64]) -> f64 {
    let bnorm = crate::sparse::norm(&sys.rhs);
    if bnorm == 0.0 {
        return 0.0;
    }
    let mut r = vec![0.0; sys.dim()];
    sys.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&sys.rhs) {
        *ri = bi - *ri;
    }
    crate::sparse::norm(&r) / bnorm
}

impl NavierStokes {
    pub fn new(
        vspace: Arc<VelocitySpace>,
        pspace: Arc<PressureSpace>,
        ctx: FormContext,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if pspace.degree() != vspace.degree() {
            return Err(Error::invalid(format!(
                "pressure degree {} does not match velocity degree {}",
                pspace.degree(),
                vspace.degree()
            )));
        }
        let assembler = Assembler::new(vspace.clone())?;
        let mass = assembler.mass();
        let mut viscous = assembler.diffusion(ctx.sigma);
        viscous.values.iter_mut().for_each(|v| *v *= ctx.nu);
        let div = assembler.divergence(&pspace)?;
        let free = vspace.free_dofs();
        let dir = vspace.dirichlet_dofs();
        let all_p: Vec<usize> = (0..pspace.n_dofs()).collect();
        let div_f = div.submatrix(&all_p, free);
        let div_ft = div_f.transpose();
        let div_d = div.submatrix(&all_p, dir);
        let split = Splitting::new(assembler.pattern(), free, dir);
        let (_, pmass_inv) = assemble_pressure_mass(&pspace)?;
        let pure_dirichlet = !vspace.face_sets().has_outflow();
        let projector = if cfg.zero_mean_pressure {
            Some(MeanProjector::new(&pspace, vspace.face_sets())?)
        } else {
            None
        };
        let diag = mass.submatrix(free, free).diagonal();
        let laplacian = PressureLaplacian::new(&div_f, &diag, pure_dirichlet)?;
        let lumped_inv = diag.iter().map(|d| 1.0 / d).collect();
        let h = vspace.mesh().mesh_size();
        let shared = Shared {
            assembler,
            pspace,
            nu: ctx.nu,
            sigma: ctx.sigma,
            mass,
            viscous,
            div_f: Arc::new(div_f),
            div_ft: Arc::new(div_ft),
            div_d,
            split,
            lu_pattern: OnceLock::new(),
            pmass_inv,
            projector,
            laplacian,
            lumped_inv,
            h,
        };
        Ok(NavierStokes {
            shared: Arc::new(shared),
            ctx,
            cfg,
        })
    }

    /// Same discretization with different boundary data or forcing.
    pub fn with_context(&self, ctx: FormContext) -> Result<Self> {
        if ctx.nu != self.shared.nu || ctx.sigma != self.shared.sigma {
            return Err(Error::contract("viscosity and penalty are fixed by the assembled matrices"));
        }
        Ok(NavierStokes {
            shared: self.shared.clone(),
            ctx,
            cfg: self.cfg.clone(),
        })
    }

    pub fn velocity_space(&self) -> &Arc<VelocitySpace> {
        self.shared.assembler.space()
    }

    pub fn pressure_space(&self) -> &Arc<PressureSpace> {
        &self.shared.pspace
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn context(&self) -> &FormContext {
        &self.ctx
    }

    pub fn mass(&self) -> &Csr {
        &self.shared.mass
    }

    /// Full divergence matrix restricted to the free velocity columns.
    pub fn coupling(&self) -> &Csr {
        &self.shared.div_f
    }

    pub fn projector(&self) -> Option<&MeanProjector> {
        self.shared.projector.as_ref()
    }

    /// State at step 0 with zero pressure.
    pub fn initial_state(&self, u0: FieldCoefficients) -> Result<TrajectoryState> {
        if u0.tag != self.velocity_space().tag() {
            return Err(Error::contract("initial velocity belongs to a different space"));
        }
        Ok(TrajectoryState {
            step: 0,
            pressure: self.shared.pspace.zero_field(u0.time),
            velocity: u0,
            iterations: 0,
            last_iterations: 0,
            last_residual: 0.0,
        })
    }

    pub fn build_saddle_system(&self, prev: &TrajectoryState) -> Result<SaddleSystem> {
        let sh = &*self.shared;
        let space = sh.assembler.space();
        let dt = self.cfg.dt;
        let t = prev.time() + dt;
        let u_prev = &prev.velocity.coeffs;
        let conv = sh.assembler.convection(u_prev)?;
        let mut k = conv;
        for ((kv, mv), av) in k.values.iter_mut().zip(&sh.mass.values).zip(&sh.viscous.values) {
            *kv = mv + dt * (*kv + av);
        }
        let k_ff = Splitting::extract(&sh.split.ff, &sh.split.ff_pos, &k);
        let k_fd = Splitting::extract(&sh.split.fd, &sh.split.fd_pos, &k);

        let boundary = self.ctx.boundary.clone();
        let ud_full = space.dirichlet_values(&|x| boundary(x, t));
        let ud: Vec<f64> = space.dirichlet_dofs().iter().map(|&d| ud_full[d]).collect();

        let mut full = sh.mass.mul_vec(u_prev);
        let load = sh.assembler.rhs(&self.ctx, t);
        for (r, l) in full.iter_mut().zip(&load) {
            *r += dt * l;
        }
        let nv = space.n_free();
        let np = sh.pspace.n_dofs();
        let mut rhs = vec![0.0; nv + np];
        for (i, &d) in space.free_dofs().iter().enumerate() {
            rhs[i] = full[d];
        }
        k_fd.matvec_add(-1.0, &ud, &mut rhs[..nv]);
        sh.div_d.matvec_add(-1.0, &ud, &mut rhs[nv..]);
        Ok(SaddleSystem {
            velocity_block: k_ff,
            coupling: sh.div_f.clone(),
            coupling_t: sh.div_ft.clone(),
            rhs,
            dirichlet_values: ud,
        })
    }

    pub fn preconditioner<'a>(&'a self, sys: &'a SaddleSystem) -> Result<BlockPreconditioner<'a>> {
        self.preconditioner_with(sys, self.velocity_approx())
    }

    /// ILU(0) is swapped for LU once the viscous part dominates the
    /// velocity block, where ILU(0) of the interior-penalty matrix stalls.
    fn velocity_approx(&self) -> VelocityApprox {
        const ILU_VISCOUS_LIMIT: f64 = 0.25;
        let sh = &*self.shared;
        if self.cfg.velocity == VelocityApprox::Ilu0 && self.cfg.dt * sh.nu > ILU_VISCOUS_LIMIT * sh.h * sh.h {
            VelocityApprox::Lu
        } else {
            self.cfg.velocity
        }
    }

    fn preconditioner_with<'a>(
        &'a self,
        sys: &'a SaddleSystem,
        velocity_approx: VelocityApprox,
    ) -> Result<BlockPreconditioner<'a>> {
        let sh = &*self.shared;
        let exact = self.cfg.schur == SchurApprox::Exact;
        let velocity = if exact || velocity_approx == VelocityApprox::Lu {
            let pattern = match sh.lu_pattern.get() {
                Some(p) => p,
                None => {
                    let p = LuPattern::new(&sys.velocity_block)?;
                    sh.lu_pattern.get_or_init(|| p)
                }
            };
            VelocityInverse::Lu(pattern.factor(&sys.velocity_block)?)
        } else {
            VelocityInverse::Ilu(Ilu0::new(&sys.velocity_block)?)
        };
        let dt_nu = self.cfg.dt * sh.nu;
        let schur = match self.cfg.schur {
            SchurApprox::ScaledMass => SchurInverse::Scaled {
                scale: dt_nu + sh.h * sh.h,
                minv: &sh.pmass_inv,
            },
            SchurApprox::CahouetChabard => SchurInverse::CahouetChabard {
                lap: &sh.laplacian,
                dt_nu,
                minv: &sh.pmass_inv,
            },
            SchurApprox::Exact => match &velocity {
                VelocityInverse::Lu(lu) => SchurInverse::Exact(self.exact_schur(sys, lu)?),
                VelocityInverse::Ilu(_) => unreachable!("exact Schur complement always factors K"),
            },
        };
        Ok(BlockPreconditioner {
            velocity,
            coupling_t: &sys.coupling_t,
            schur,
            projector: sh.projector.as_ref(),
            nv: sys.n_velocity(),
            np: sys.n_pressure(),
        })
    }

    fn exact_schur(
        &self,
        sys: &SaddleSystem,
        velocity: &SparseLu,
    ) -> Result<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        const MAX_EXACT: usize = 4000;
        let np = sys.n_pressure();
        if np > MAX_EXACT {
            return Err(Error::Setup(format!(
                "exact Schur complement requested for {np} pressure DOFs (limit {MAX_EXACT})"
            )));
        }
        let nv = sys.n_velocity();
        let mut s = DMatrix::<f64>::zeros(np, np);
        let mut col = vec![0.0; nv];
        let mut e = vec![0.0; np];
        let mut out = vec![0.0; np];
        for j in 0..np {
            e[j] = 1.0;
            sys.coupling_t.matvec(&e, &mut col);
            velocity.solve_in_place(&mut col);
            sys.coupling.matvec(&col, &mut out);
            s.column_mut(j).copy_from_slice(&out);
            e[j] = 0.0;
        }
        if !self.velocity_space().face_sets().has_outflow() {
            // Constants span the kernel; a rank-one shift leaves the action
            // on consistent right-hand sides unchanged.
            let c = nalgebra::DVector::from_vec(self.shared.pspace.constant_vector());
            let scale = s.diagonal().mean().abs().max(f64::MIN_POSITIVE) / c.norm_squared().max(1.0);
            s += scale * &c * c.transpose();
        }
        let lu = s.lu();
        if !lu.is_invertible() {
            return Err(Error::Setup("exact Schur complement is singular".into()));
        }
        Ok(lu)
    }

    /// Solves one saddle system, starting from `guess` (velocity free part
    /// followed by the rescaled pressure).
    ///
    /// After GMRES the constraint residual is removed by the velocity update
    /// `diag(M)^{-1} B^T L^{-1} r_p`, so `B u` matches its right-hand side to
    /// rounding. GMRES resumes if the update pushed the full residual back
    /// above the tolerance.
    pub fn solve_system(&self, sys: &SaddleSystem, guess: &mut [f64]) -> Result<GmresStats> {
        if !self.cfg.preconditioned {
            return self.solve_with(sys, &IdentityOp(sys.dim()), guess);
        }
        let start = guess.to_vec();
        let pre = self.preconditioner(sys)?;
        match self.solve_with(sys, &pre, guess) {
            // ILU(0) of the viscous block can break down when dt*nu/h^2 is
            // large; retry once with the exact velocity factorization.
            Err(Error::NonConvergence { iterations, residual })
                if self.velocity_approx() == VelocityApprox::Ilu0 && self.cfg.schur != SchurApprox::Exact =>
            {
                log::warn!(
                    "ILU(0) preconditioned GMRES stalled at residual {residual:.3e} after {iterations} iterations; \
                     retrying with sparse LU for the velocity block"
                );
                guess.copy_from_slice(&start);
                let pre = self.preconditioner_with(sys, VelocityApprox::Lu)?;
                let mut stats = self.solve_with(sys, &pre, guess)?;
                stats.iterations += iterations;
                Ok(stats)
            }
            other => other,
        }
    }

    fn solve_with(&self, sys: &SaddleSystem, pre: &dyn Operator, guess: &mut [f64]) -> Result<GmresStats> {
        const ROUNDS: usize = 3;
        let mut total = GmresStats::default();
        for _ in 0..ROUNDS {
            let stats = gmres(sys, pre, &sys.rhs, guess, &self.cfg.gmres)?;
            total.iterations += stats.iterations;
            total.history.extend(stats.history);
            self.enforce_constraint(sys, guess);
            total.residual = relative_residual(sys, guess);
            if total.residual <= self.cfg.gmres.tol {
                break;
            }
        }
        Ok(total)
    }

    fn enforce_constraint(&self, sys: &SaddleSystem, x: &mut [f64]) {
        let sh = &*self.shared;
        let nv = sys.n_velocity();
        let (xu, _) = x.split_at_mut(nv);
        let mut r = sys.rhs[nv..].to_vec();
        sys.coupling.matvec_add(-1.0, xu, &mut r);
        sh.laplacian.solve(&mut r);
        let mut du = vec![0.0; nv];
        sys.coupling_t.matvec(&r, &mut du);
        for ((u, d), w) in xu.iter_mut().zip(&du).zip(&sh.lumped_inv) {
            *u += w * d;
        }
    }

    /// One implicit-Euler step.
    pub fn step(&self, state: &TrajectoryState) -> Result<TrajectoryState> {
        let space = self.velocity_space();
        let sys = self.build_saddle_system(state)?;
        let nv = sys.n_velocity();
        let mut x = vec![0.0; sys.dim()];
        for (i, &d) in space.free_dofs().iter().enumerate() {
            x[i] = state.velocity.coeffs[d];
        }
        x[nv..].copy_from_slice(&state.pressure.coeffs);
        let stats = self.solve_system(&sys, &mut x)?;
        let mut u = vec![0.0; space.n_dofs()];
        for (i, &d) in space.free_dofs().iter().enumerate() {
            u[d] = x[i];
        }
        for (&d, &v) in space.dirichlet_dofs().iter().zip(&sys.dirichlet_values) {
            u[d] = v;
        }
        let mut p = x[nv..].to_vec();
        if let Some(proj) = &self.shared.projector {
            proj.apply(&mut p);
        }
        let time = (state.step + 1) as f64 * self.cfg.dt;
        Ok(TrajectoryState {
            step: state.step + 1,
            velocity: FieldCoefficients::new(space.tag(), u, time),
            pressure: FieldCoefficients::new(self.shared.pspace.tag(), p, time),
            iterations: state.iterations + stats.iterations,
            last_iterations: stats.iterations,
            last_residual: stats.residual,
        })
    }

    /// Runs all configured steps from `u0`; `observer` sees every new state.
    pub fn evolve_with(
        &self,
        u0: FieldCoefficients,
        mut observer: impl FnMut(&TrajectoryState) -> Result<()>,
    ) -> Result<TrajectoryState> {
        let mut state = self.initial_state(u0)?;
        for n in 1..=self.cfg.steps {
            state = self.step(&state).map_err(|e| Error::Step {
                step: n,
                source: Box::new(e),
            })?;
            observer(&state)?;
        }
        Ok(state)
    }

    pub fn evolve(&self, u0: FieldCoefficients) -> Result<TrajectoryState> {
        self.evolve_with(u0, |_| Ok(()))
    }

    pub fn diagnostics(&self, state: &TrajectoryState) -> Result<StepDiagnostics> {
        let space = self.velocity_space();
        Ok(StepDiagnostics {
            step: state.step,
            time: state.time(),
            l2_norm: space.l2_norm(&state.velocity.coeffs)?,
            max_divergence: space.max_divergence(&state.velocity.coeffs)?,
            iterations: state.last_iterations,
        })
    }
}

#[cfg(test)]
mod tests;

//! Assembly of the mass, upwind convection, SIP diffusion and divergence
//! forms and of the source/boundary linear form.
//!
//! All velocity matrices share one sparsity pattern (element blocks plus
//! face couplings), so time-stepping combines them entrywise.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::BoundaryKind;
use crate::par::Exec;
use crate::quadrature;
use crate::spaces::geometry::ElementMap;
use crate::sparse::{Coo, Csr};
use crate::spaces::{BasisTable, FieldCoefficients, PressureSpace, VelocitySpace};

pub type VectorField = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Coefficients and data entering the forms.
#[derive(Clone)]
pub struct FormContext {
    pub nu: f64,
    pub sigma: f64,
    /// Dirichlet data `g(x, t)`.
    pub boundary: VectorField,
    /// Body force `f(x, t)`.
    pub force: VectorField,
}

impl std::fmt::Debug for FormContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormContext")
            .field("nu", &self.nu)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

pub fn zero_field() -> VectorField {
    Arc::new(|_, _| [0.0, 0.0])
}

/// Default penalty `10 (k + 1)^2`.
pub fn default_sigma(degree: usize) -> f64 {
    10.0 * ((degree + 1) * (degree + 1)) as f64
}

impl FormContext {
    pub fn new(nu: f64, sigma: f64, boundary: VectorField, force: VectorField) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("penalty must be positive, got {sigma}")));
        }
        Ok(FormContext {
            nu,
            sigma,
            boundary,
            force,
        })
    }

    /// Zero force and zero boundary data.
    pub fn homogeneous(nu: f64, sigma: f64) -> Result<Self> {
        Self::new(nu, sigma, zero_field(), zero_field())
    }
}

struct FaceData {
    sides: Vec<BasisTable>,
    normal: [f64; 2],
    size: f64,
    kind: Option<BoundaryKind>,
}

/// Cached basis tables and scatter positions for one velocity space.
pub struct Assembler {
    space: Arc<VelocitySpace>,
    volume: Vec<BasisTable>,
    faces: Vec<FaceData>,
    pattern: Csr,
    elem_pos: Vec<Vec<usize>>,
    face_pos: Vec<Vec<usize>>,
}

impl std::fmt::Debug for Assembler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Assembler")
            .field("n_dofs", &self.space.n_dofs())
            .field("nnz", &self.pattern.nnz())
            .finish_non_exhaustive()
    }
}

impl Assembler {
    pub fn new(space: Arc<VelocitySpace>) -> Result<Self> {
        let mesh = space.mesh().clone();
        let volume = (0..mesh.n_elements())
            .map(|e| space.tabulate_volume(e))
            .collect::<Result<Vec<_>>>()?;
        let mut faces = Vec::with_capacity(mesh.n_faces());
        for f in 0..mesh.n_faces() {
            let face = mesh.face(f);
            let mut sides = vec![space.tabulate_face(f, 0)?];
            if face.elements.1.is_some() {
                sides.push(space.tabulate_face(f, 1)?);
            }
            faces.push(FaceData {
                sides,
                normal: face.normal,
                size: face.size,
                kind: space.boundary_kind(f),
            });
        }

        let n = space.n_dofs();
        let mut coo = Coo::new(n, n);
        for e in 0..mesh.n_elements() {
            for &r in space.element_dofs(e) {
                for &c in space.element_dofs(e) {
                    coo.push(r, c, 0.0);
                }
            }
        }
        for f in mesh.interior_faces() {
            let dofs = Self::face_dofs_of(&space, f);
            for &r in &dofs {
                for &c in &dofs {
                    coo.push(r, c, 0.0);
                }
            }
        }
        let pattern = coo.to_csr();
        let block_pos = |dofs: &[usize]| -> Vec<usize> {
            let mut pos = Vec::with_capacity(dofs.len() * dofs.len());
            for &r in dofs {
                for &c in dofs {
                    pos.push(pattern.position(r, c).expect("entry in pattern"));
                }
            }
            pos
        };
        let elem_pos = (0..mesh.n_elements())
            .map(|e| block_pos(space.element_dofs(e)))
            .collect();
        let face_pos = (0..mesh.n_faces())
            .map(|f| block_pos(&Self::face_dofs_of(&space, f)))
            .collect();
        Ok(Assembler {
            space,
            volume,
            faces,
            pattern,
            elem_pos,
            face_pos,
        })
    }

    fn face_dofs_of(space: &VelocitySpace, f: usize) -> Vec<usize> {
        let face = space.mesh().face(f);
        let mut dofs = space.element_dofs(face.elements.0).to_vec();
        if let Some(k2) = face.elements.1 {
            dofs.extend_from_slice(space.element_dofs(k2));
        }
        dofs
    }

    pub fn space(&self) -> &Arc<VelocitySpace> {
        &self.space
    }

    /// Empty matrix with the shared velocity pattern.
    pub fn pattern(&self) -> &Csr {
        &self.pattern
    }

    pub fn volume_table(&self, e: usize) -> &BasisTable {
        &self.volume[e]
    }

    fn with_values(&self, values: Vec<f64>) -> Csr {
        let mut m = self.pattern.clone();
        m.values = values;
        m
    }

    pub fn mass(&self) -> Csr {
        let mut vals = vec![0.0; self.pattern.nnz()];
        for (e, t) in self.volume.iter().enumerate() {
            let nb = t.n_basis;
            let pos = &self.elem_pos[e];
            for q in 0..t.n_points() {
                let row = &t.values[q * nb..(q + 1) * nb];
                for i in 0..nb {
                    for j in 0..nb {
                        vals[pos[i * nb + j]] += t.jxw[q] * (row[i][0] * row[j][0] + row[i][1] * row[j][1]);
                    }
                }
            }
        }
        self.with_values(vals)
    }

    /// Upwind convection matrix for the advecting field `w` (global coefficients).
    pub fn convection(&self, w: &[f64]) -> Result<Csr> {
        if w.len() != self.space.n_dofs() {
            return Err(Error::contract("advecting field has the wrong length"));
        }
        let mut vals = vec![0.0; self.pattern.nnz()];
        let mut wq = Vec::new();
        for (e, t) in self.volume.iter().enumerate() {
            let nb = t.n_basis;
            let pos = &self.elem_pos[e];
            let c = self.space.local_coeffs(w, e);
            for q in 0..t.n_points() {
                let wv = t.value(q, &c);
                if wv == [0.0, 0.0] {
                    continue;
                }
                let vrow = &t.values[q * nb..(q + 1) * nb];
                let grow = &t.grads[q * nb..(q + 1) * nb];
                wq.clear();
                // (w . grad phi_j) for each trial function j.
                wq.extend(grow.iter().map(|g| {
                    [
                        wv[0] * g[0][0] + wv[1] * g[0][1],
                        wv[0] * g[1][0] + wv[1] * g[1][1],
                    ]
                }));
                for i in 0..nb {
                    for j in 0..nb {
                        vals[pos[i * nb + j]] += t.jxw[q] * (wq[j][0] * vrow[i][0] + wq[j][1] * vrow[i][1]);
                    }
                }
            }
        }
        let mesh = self.space.mesh();
        for f in mesh.interior_faces() {
            let fd = &self.faces[f];
            let face = mesh.face(f);
            let (t1, t2) = (&fd.sides[0], &fd.sides[1]);
            let c1 = self.space.local_coeffs(w, face.elements.0);
            let nb1 = t1.n_basis;
            let nb2 = t2.n_basis;
            let nt = nb1 + nb2;
            let pos = &self.face_pos[f];
            for q in 0..t1.n_points() {
                let wv = t1.value(q, &c1);
                let wn = wv[0] * fd.normal[0] + wv[1] * fd.normal[1];
                if wn == 0.0 {
                    continue;
                }
                let jxw = t1.jxw[q];
                // jump and average of each combined function
                let (jumps, avgs) = face_jumps(t1, t2, q);
                for i in 0..nt {
                    for j in 0..nt {
                        let ju_av = jumps[j][0] * avgs[i][0] + jumps[j][1] * avgs[i][1];
                        let ju_jv = jumps[j][0] * jumps[i][0] + jumps[j][1] * jumps[i][1];
                        vals[pos[i * nt + j]] += jxw * (-wn * ju_av + wn.abs() * ju_jv);
                    }
                }
            }
        }
        Ok(self.with_values(vals))
    }

    /// SIP diffusion matrix with penalty `sigma` (without the viscosity).
    pub fn diffusion(&self, sigma: f64) -> Csr {
        self.diffusion_parts(sigma, true, true)
    }

    /// Volume, consistency and penalty parts can be toggled for testing.
    pub fn diffusion_parts(&self, sigma: f64, consistency: bool, penalty: bool) -> Csr {
        let mut vals = vec![0.0; self.pattern.nnz()];
        for (e, t) in self.volume.iter().enumerate() {
            let nb = t.n_basis;
            let pos = &self.elem_pos[e];
            for q in 0..t.n_points() {
                let g = &t.grads[q * nb..(q + 1) * nb];
                for i in 0..nb {
                    for j in 0..nb {
                        let mut s = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                s += g[i][a][b] * g[j][a][b];
                            }
                        }
                        vals[pos[i * nb + j]] += t.jxw[q] * s;
                    }
                }
            }
        }
        for (f, fd) in self.faces.iter().enumerate() {
            let interior = fd.sides.len() == 2;
            if !interior && fd.kind != Some(BoundaryKind::Dirichlet) {
                continue;
            }
            let n = fd.normal;
            let pos = &self.face_pos[f];
            let t1 = &fd.sides[0];
            for q in 0..t1.n_points() {
                let jxw = t1.jxw[q];
                let (jumps, avg_grads) = if interior {
                    face_jump_grads(t1, &fd.sides[1], q)
                } else {
                    boundary_jump_grads(t1, q)
                };
                let nt = jumps.len();
                // {grad phi} n for each combined function
                let gn: Vec<[f64; 2]> = avg_grads
                    .iter()
                    .map(|g| [g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]])
                    .collect();
                for i in 0..nt {
                    for j in 0..nt {
                        let mut s = 0.0;
                        if consistency {
                            s -= jumps[i][0] * gn[j][0] + jumps[i][1] * gn[j][1];
                            s -= jumps[j][0] * gn[i][0] + jumps[j][1] * gn[i][1];
                        }
                        if penalty {
                            s += sigma / fd.size * (jumps[i][0] * jumps[j][0] + jumps[i][1] * jumps[j][1]);
                        }
                        vals[pos[i * nt + j]] += jxw * s;
                    }
                }
            }
        }
        self.with_values(vals)
    }

    /// Divergence matrix: pressure rows, velocity columns.
    pub fn divergence(&self, pspace: &PressureSpace) -> Result<Csr> {
        if pspace.mesh().checksum() != self.space.mesh().checksum() {
            return Err(Error::contract("pressure and velocity spaces live on different meshes"));
        }
        let mesh = self.space.mesh();
        let mut coo = Coo::new(pspace.n_dofs(), self.space.n_dofs());
        for e in 0..mesh.n_elements() {
            let rule = self.space.volume_rule(mesh.kind(e));
            let t = &self.volume[e];
            let nb = t.n_basis;
            let pv = pspace.tabulate(e, &rule.points);
            let prange = pspace.element_dofs(e);
            let np = prange.len();
            let mut local = vec![0.0; np * nb];
            for q in 0..t.n_points() {
                for a in 0..np {
                    let qa = pv[q * np + a];
                    for j in 0..nb {
                        local[a * nb + j] += t.jxw[q] * qa * t.divs[q * nb + j];
                    }
                }
            }
            for (a, r) in prange.enumerate() {
                for (j, &c) in self.space.element_dofs(e).iter().enumerate() {
                    coo.push(r, c, local[a * nb + j]);
                }
            }
        }
        Ok(coo.to_csr())
    }

    /// Right-hand side of the source/boundary linear form at time `t`.
    pub fn rhs(&self, ctx: &FormContext, t: f64) -> Vec<f64> {
        self.rhs_parts(ctx, t, true, true, true)
    }

    pub fn rhs_parts(&self, ctx: &FormContext, time: f64, source: bool, consistency: bool, penalty: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.space.n_dofs()];
        if source {
            for (e, t) in self.volume.iter().enumerate() {
                let nb = t.n_basis;
                let dofs = self.space.element_dofs(e);
                for q in 0..t.n_points() {
                    let f = (ctx.force)(t.points[q], time);
                    if f == [0.0, 0.0] {
                        continue;
                    }
                    for i in 0..nb {
                        let phi = t.values[q * nb + i];
                        out[dofs[i]] += t.jxw[q] * (f[0] * phi[0] + f[1] * phi[1]);
                    }
                }
            }
        }
        let mesh = self.space.mesh();
        for &f in &self.space.face_sets().dirichlet {
            let fd = &self.faces[f];
            let t = &fd.sides[0];
            let nb = t.n_basis;
            let n = fd.normal;
            let dofs = self.space.element_dofs(mesh.face(f).elements.0);
            for q in 0..t.n_points() {
                let g = (ctx.boundary)(t.points[q], time);
                if g == [0.0, 0.0] {
                    continue;
                }
                for i in 0..nb {
                    let phi = t.values[q * nb + i];
                    let gr = t.grads[q * nb + i];
                    let mut s = 0.0;
                    if consistency {
                        // (g (x) n) : grad v = g . (grad v n)
                        let gvn = [gr[0][0] * n[0] + gr[0][1] * n[1], gr[1][0] * n[0] + gr[1][1] * n[1]];
                        s -= ctx.nu * (g[0] * gvn[0] + g[1] * gvn[1]);
                    }
                    if penalty {
                        s += ctx.nu * ctx.sigma / fd.size * (g[0] * phi[0] + g[1] * phi[1]);
                    }
                    out[dofs[i]] += t.jxw[q] * s;
                }
            }
        }
        out
    }

    /// Mass and diffusion assembled with elements processed by `exec`,
    /// merged in element order.
    pub fn mass_with(&self, exec: Exec) -> Csr {
        let blocks = exec.map(self.volume.len(), |e| {
            let t = &self.volume[e];
            let nb = t.n_basis;
            let mut local = vec![0.0; nb * nb];
            for q in 0..t.n_points() {
                let row = &t.values[q * nb..(q + 1) * nb];
                for i in 0..nb {
                    for j in 0..nb {
                        local[i * nb + j] += t.jxw[q] * (row[i][0] * row[j][0] + row[i][1] * row[j][1]);
                    }
                }
            }
            local
        });
        let mut vals = vec![0.0; self.pattern.nnz()];
        for (e, local) in blocks.iter().enumerate() {
            for (k, &p) in self.elem_pos[e].iter().enumerate() {
                vals[p] += local[k];
            }
        }
        self.with_values(vals)
    }
}

/// Jumps `[[phi]]` and averages `{phi}` of the combined K1-then-K2 functions.
fn face_jumps(t1: &BasisTable, t2: &BasisTable, q: usize) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let nb1 = t1.n_basis;
    let nb2 = t2.n_basis;
    let mut jumps = Vec::with_capacity(nb1 + nb2);
    let mut avgs = Vec::with_capacity(nb1 + nb2);
    for i in 0..nb1 {
        let v = t1.values[q * nb1 + i];
        jumps.push(v);
        avgs.push([0.5 * v[0], 0.5 * v[1]]);
    }
    for i in 0..nb2 {
        let v = t2.values[q * nb2 + i];
        jumps.push([-v[0], -v[1]]);
        avgs.push([0.5 * v[0], 0.5 * v[1]]);
    }
    (jumps, avgs)
}

fn face_jump_grads(t1: &BasisTable, t2: &BasisTable, q: usize) -> (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>) {
    let nb1 = t1.n_basis;
    let nb2 = t2.n_basis;
    let mut jumps = Vec::with_capacity(nb1 + nb2);
    let mut grads = Vec::with_capacity(nb1 + nb2);
    let half = |g: [[f64; 2]; 2]| [[0.5 * g[0][0], 0.5 * g[0][1]], [0.5 * g[1][0], 0.5 * g[1][1]]];
    for i in 0..nb1 {
        jumps.push(t1.values[q * nb1 + i]);
        grads.push(half(t1.grads[q * nb1 + i]));
    }
    for i in 0..nb2 {
        let v = t2.values[q * nb2 + i];
        jumps.push([-v[0], -v[1]]);
        grads.push(half(t2.grads[q * nb2 + i]));
    }
    (jumps, grads)
}

fn boundary_jump_grads(t: &BasisTable, q: usize) -> (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>) {
    let nb = t.n_basis;
    (
        t.values[q * nb..(q + 1) * nb].to_vec(),
        t.grads[q * nb..(q + 1) * nb].to_vec(),
    )
}

/// Pressure mass matrix and its inverse; both are block diagonal by element.
pub fn assemble_pressure_mass(pspace: &PressureSpace) -> Result<(Csr, Csr)> {
    let mesh = pspace.mesh();
    let n = pspace.n_dofs();
    let mut mass = Coo::new(n, n);
    let mut inv = Coo::new(n, n);
    for e in 0..mesh.n_elements() {
        let kind = mesh.kind(e);
        let rule = quadrature::cell_rule(kind, pspace.degree() + 2);
        let map = ElementMap::new(mesh, e);
        let vals = pspace.tabulate(e, &rule.points);
        let dofs = pspace.element_dofs(e);
        let nb = dofs.len();
        let mut block = DMatrix::<f64>::zeros(nb, nb);
        for q in 0..rule.len() {
            let jxw = rule.weights[q] * map.jacobian(rule.points[q]).det;
            for i in 0..nb {
                for j in 0..nb {
                    block[(i, j)] += jxw * vals[q * nb + i] * vals[q * nb + j];
                }
            }
        }
        let block_inv = block
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Assembly(format!("singular pressure mass block on element {e}")))?;
        for i in 0..nb {
            for j in 0..nb {
                mass.push(dofs.start + i, dofs.start + j, block[(i, j)]);
                inv.push(dofs.start + i, dofs.start + j, block_inv[(i, j)]);
            }
        }
    }
    Ok((mass.to_csr(), inv.to_csr()))
}

pub fn assemble_mass(space: &VelocitySpace) -> Result<Csr> {
    Ok(Assembler::new(Arc::new(space.clone()))?.mass())
}

pub fn assemble_convection_upwind(space: &VelocitySpace, w: &FieldCoefficients) -> Result<Csr> {
    if w.tag != space.tag() {
        return Err(Error::contract("advecting field belongs to a different space"));
    }
    Assembler::new(Arc::new(space.clone()))?.convection(&w.coeffs)
}

pub fn assemble_diffusion_sip(space: &VelocitySpace, ctx: &FormContext) -> Result<Csr> {
    Ok(Assembler::new(Arc::new(space.clone()))?.diffusion(ctx.sigma))
}

pub fn assemble_divergence(vspace: &VelocitySpace, pspace: &PressureSpace) -> Result<Csr> {
    Assembler::new(Arc::new(vspace.clone()))?.divergence(pspace)
}

pub fn assemble_rhs(space: &VelocitySpace, ctx: &FormContext, t: f64) -> Result<Vec<f64>> {
    Ok(Assembler::new(Arc::new(space.clone()))?.rhs(ctx, t))
}

#[cfg(test)]
mod tests;

//! Raviart-Thomas velocity spaces, discontinuous pressure spaces, field
//! coefficients and their evaluation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, CellKind, FaceSets, Mesh2D};
use crate::quadrature::{self, gauss_legendre, Rule};

mod field;
pub mod geometry;
pub mod reference;

pub use field::{FieldCoefficients, FieldKind, SpaceTag};
pub use geometry::{in_reference, piola_gradient, piola_transform, piola_value, ElementMap, Jacobian};
pub use reference::{RtReference, ScalarReference};

/// Basis data of one element (or one side of a face) at a set of points.
///
/// Values are the global basis functions restricted to the element, i.e.
/// Piola-mapped and multiplied by the orientation signs. Point-major layout:
/// entry `q * n_basis + i`.
#[derive(Debug, Clone, Default)]
pub struct BasisTable {
    pub n_basis: usize,
    pub points: Vec<[f64; 2]>,
    /// Quadrature weight times the measure (area or face length) factor.
    pub jxw: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub grads: Vec<[[f64; 2]; 2]>,
    pub divs: Vec<f64>,
}

impl BasisTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Field value at point `q` for local coefficients `c`.
    pub fn value(&self, q: usize, c: &[f64]) -> [f64; 2] {
        let mut v = [0.0; 2];
        let row = &self.values[q * self.n_basis..(q + 1) * self.n_basis];
        for (phi, &ci) in row.iter().zip(c) {
            v[0] += ci * phi[0];
            v[1] += ci * phi[1];
        }
        v
    }

    pub fn gradient(&self, q: usize, c: &[f64]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        let row = &self.grads[q * self.n_basis..(q + 1) * self.n_basis];
        for (phi, &ci) in row.iter().zip(c) {
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += ci * phi[a][b];
                }
            }
        }
        g
    }

    pub fn divergence(&self, q: usize, c: &[f64]) -> f64 {
        self.divs[q * self.n_basis..(q + 1) * self.n_basis]
            .iter()
            .zip(c)
            .map(|(d, ci)| d * ci)
            .sum()
    }
}

/// H(div)-conforming RT_k space on a mesh with essential normal components
/// on Dirichlet faces.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    mesh: Arc<Mesh2D>,
    degree: usize,
    face_sets: FaceSets,
    boundary_kinds: Vec<Option<BoundaryKind>>,
    tri: RtReference,
    quad: RtReference,
    elem_dofs: Vec<Vec<usize>>,
    elem_signs: Vec<Vec<f64>>,
    n_dofs: usize,
    dirichlet_dofs: Vec<usize>,
    free_dofs: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

pub fn build_velocity_space(mesh: Arc<Mesh2D>, k: usize, face_sets: FaceSets) -> Result<VelocitySpace> {
    VelocitySpace::new(mesh, k, face_sets)
}

impl VelocitySpace {
    pub fn new(mesh: Arc<Mesh2D>, degree: usize, face_sets: FaceSets) -> Result<Self> {
        if degree > 1 {
            return Err(Error::invalid(format!(
                "velocity degree {degree} is not supported (use 0 or 1)"
            )));
        }
        let n_boundary = mesh.boundary_faces().count();
        if face_sets.interior.len() + face_sets.dirichlet.len() + face_sets.outflow.len() != mesh.n_faces()
            || face_sets.dirichlet.len() + face_sets.outflow.len() != n_boundary
        {
            return Err(Error::contract("face sets do not partition the mesh faces"));
        }
        let tri = RtReference::new(CellKind::Triangle, degree)?;
        let quad = RtReference::new(CellKind::Quadrilateral, degree)?;
        let per_face = degree + 1;
        let mut next = mesh.n_faces() * per_face;
        let mut elem_dofs = Vec::with_capacity(mesh.n_elements());
        let mut elem_signs = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let verts = mesh.element(e);
            let nv = verts.len();
            let reference = if mesh.kind(e) == CellKind::Triangle { &tri } else { &quad };
            let mut dofs = Vec::with_capacity(reference.n_basis());
            let mut signs = Vec::with_capacity(reference.n_basis());
            for (l, &f) in mesh.element_faces(e).iter().enumerate() {
                let normal_sign = if mesh.face(f).elements.0 == e { 1.0 } else { -1.0 };
                let flipped = verts[l] > verts[(l + 1) % nv];
                for j in 0..per_face {
                    dofs.push(f * per_face + j);
                    let odd = j % 2 == 1;
                    signs.push(if flipped && odd { -normal_sign } else { normal_sign });
                }
            }
            for _ in 0..reference.n_interior() {
                dofs.push(next);
                signs.push(1.0);
                next += 1;
            }
            elem_dofs.push(dofs);
            elem_signs.push(signs);
        }
        let n_dofs = next;
        let boundary_kinds = face_sets.boundary_kinds(mesh.n_faces());
        let mut is_dirichlet = vec![false; n_dofs];
        for &f in &face_sets.dirichlet {
            for j in 0..per_face {
                is_dirichlet[f * per_face + j] = true;
            }
        }
        let dirichlet_dofs: Vec<usize> = (0..n_dofs).filter(|&d| is_dirichlet[d]).collect();
        let free_dofs: Vec<usize> = (0..n_dofs).filter(|&d| !is_dirichlet[d]).collect();
        let mut free_index = vec![None; n_dofs];
        for (i, &d) in free_dofs.iter().enumerate() {
            free_index[d] = Some(i);
        }
        Ok(VelocitySpace {
            mesh,
            degree,
            face_sets,
            boundary_kinds,
            tri,
            quad,
            elem_dofs,
            elem_signs,
            n_dofs,
            dirichlet_dofs,
            free_dofs,
            free_index,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn face_sets(&self) -> &FaceSets {
        &self.face_sets
    }

    pub fn boundary_kind(&self, f: usize) -> Option<BoundaryKind> {
        self.boundary_kinds[f]
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn dofs_per_face(&self) -> usize {
        self.degree + 1
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.elem_dofs[e]
    }

    pub fn element_signs(&self, e: usize) -> &[f64] {
        &self.elem_signs[e]
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn reference(&self, kind: CellKind) -> &RtReference {
        match kind {
            CellKind::Triangle => &self.tri,
            CellKind::Quadrilateral => &self.quad,
        }
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag {
            kind: FieldKind::Velocity,
            degree: self.degree,
            n_dofs: self.n_dofs,
            mesh_checksum: self.mesh.checksum().to_string(),
        }
    }

    pub fn zero_field(&self, time: f64) -> FieldCoefficients {
        FieldCoefficients::new(self.tag(), vec![0.0; self.n_dofs], time)
    }

    pub fn volume_rule(&self, kind: CellKind) -> Rule {
        quadrature::cell_rule(kind, quadrature::volume_points(self.degree))
    }

    pub fn face_rule(&self) -> (Vec<f64>, Vec<f64>) {
        gauss_legendre(quadrature::face_points(self.degree))
    }

    /// Signed, Piola-mapped basis at reference points of element `e`.
    /// `weights` multiply `|det J|` into `jxw` when given.
    pub fn tabulate(&self, e: usize, ref_points: &[[f64; 2]], weights: Option<&[f64]>) -> Result<BasisTable> {
        if e >= self.mesh.n_elements() {
            return Err(Error::invalid(format!("element {e} out of range")));
        }
        let map = ElementMap::new(&self.mesh, e);
        let reference = self.reference(map.kind);
        let nb = reference.n_basis();
        let signs = &self.elem_signs[e];
        let np = ref_points.len();
        let mut t = BasisTable {
            n_basis: nb,
            points: Vec::with_capacity(np),
            jxw: Vec::with_capacity(np),
            values: vec![[0.0; 2]; np * nb],
            grads: vec![[[0.0; 2]; 2]; np * nb],
            divs: vec![0.0; np * nb],
        };
        let mut v = vec![[0.0; 2]; nb];
        let mut g = vec![[[0.0; 2]; 2]; nb];
        let mut d = vec![0.0; nb];
        for (q, &xi) in ref_points.iter().enumerate() {
            let jac = map.jacobian(xi);
            if !(jac.det > 0.0) {
                return Err(Error::Geometry(format!("element {e} has nonpositive Jacobian")));
            }
            t.points.push(map.map(xi));
            t.jxw.push(weights.map_or(0.0, |w| w[q] * jac.det));
            reference.eval(xi, &mut v, &mut g, &mut d);
            for i in 0..nb {
                let s = signs[i];
                let pv = piola_value(&jac, v[i]);
                let pg = piola_gradient(&jac, v[i], g[i]);
                t.values[q * nb + i] = [s * pv[0], s * pv[1]];
                t.grads[q * nb + i] = [[s * pg[0][0], s * pg[0][1]], [s * pg[1][0], s * pg[1][1]]];
                t.divs[q * nb + i] = s * d[i] / jac.det;
            }
        }
        Ok(t)
    }

    /// Basis of element `e` at its volume quadrature points.
    pub fn tabulate_volume(&self, e: usize) -> Result<BasisTable> {
        let rule = self.volume_rule(self.mesh.kind(e));
        self.tabulate(e, &rule.points, Some(&rule.weights))
    }

    /// Basis of element `side` on face `f` at the face Gauss points, ordered
    /// along the face from its low vertex to its high vertex. `jxw` holds
    /// weight times face length.
    pub fn tabulate_face(&self, f: usize, side: usize) -> Result<BasisTable> {
        let face = self.mesh.face(f);
        let (e, l) = match side {
            0 => (face.elements.0, face.local_edges.0),
            _ => match (face.elements.1, face.local_edges.1) {
                (Some(e), Some(l)) => (e, l),
                _ => return Err(Error::contract(format!("face {f} has no second element"))),
            },
        };
        let verts = self.mesh.element(e);
        let flipped = verts[l] > verts[(l + 1) % verts.len()];
        let (s, w) = self.face_rule();
        let kind = self.mesh.kind(e);
        let pts: Vec<[f64; 2]> = s
            .iter()
            .map(|&s| reference::edge_point(kind, l, if flipped { 1.0 - s } else { s }))
            .collect();
        let mut t = self.tabulate(e, &pts, None)?;
        t.jxw = w.iter().map(|w| w * face.size).collect();
        Ok(t)
    }

    fn check_field(&self, field: &FieldCoefficients) -> Result<()> {
        if field.tag != self.tag() {
            return Err(Error::contract(format!(
                "field belongs to a different space ({:?} degree {}, {} dofs)",
                field.tag.kind, field.tag.degree, field.tag.n_dofs
            )));
        }
        Ok(())
    }

    pub fn local_coeffs(&self, field: &[f64], e: usize) -> Vec<f64> {
        self.elem_dofs[e].iter().map(|&d| field[d]).collect()
    }

    /// Physical velocity values at reference points of element `e`.
    pub fn evaluate_field(&self, field: &FieldCoefficients, e: usize, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        self.check_field(field)?;
        let t = self.tabulate(e, points, None)?;
        let c = self.local_coeffs(&field.coeffs, e);
        Ok((0..points.len()).map(|q| t.value(q, &c)).collect())
    }

    /// Direct path: reference combination first, then a single Piola map.
    pub fn evaluate_field_direct(&self, field: &FieldCoefficients, e: usize, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        self.check_field(field)?;
        if e >= self.mesh.n_elements() {
            return Err(Error::invalid(format!("element {e} out of range")));
        }
        let map = ElementMap::new(&self.mesh, e);
        let reference = self.reference(map.kind);
        let c: Vec<f64> = self.elem_dofs[e]
            .iter()
            .zip(&self.elem_signs[e])
            .map(|(&d, &s)| s * field.coeffs[d])
            .collect();
        points
            .iter()
            .map(|&xi| {
                let vals = reference.values_at(xi);
                let mut r = [0.0; 2];
                for (v, ci) in vals.iter().zip(&c) {
                    r[0] += ci * v[0];
                    r[1] += ci * v[1];
                }
                let jac = map.jacobian(xi);
                Ok(piola_transform(&jac, &[r])?[0])
            })
            .collect()
    }

    /// Value and gradient of `coeffs` at physical point `x` inside element `e`.
    pub fn point_value(&self, coeffs: &[f64], e: usize, x: [f64; 2]) -> Result<[f64; 2]> {
        let map = ElementMap::new(&self.mesh, e);
        let xi = map
            .inverse(x)
            .ok_or_else(|| Error::Geometry(format!("cannot invert map of element {e}")))?;
        let t = self.tabulate(e, &[xi], None)?;
        Ok(t.value(0, &self.local_coeffs(coeffs, e)))
    }

    /// Values of the essential normal DOFs for boundary data `g`:
    /// `int_F g . n_F L_j(s) ds` on every Dirichlet face.
    pub fn dirichlet_values(&self, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let per_face = self.dofs_per_face();
        let (s, w) = gauss_legendre(quadrature::face_points(self.degree) + 1);
        let mut out = vec![0.0; self.n_dofs];
        for &f in &self.face_sets.dirichlet {
            let face = self.mesh.face(f);
            let a = self.mesh.vertices()[face.vertices[0]];
            let b = self.mesh.vertices()[face.vertices[1]];
            for j in 0..per_face {
                let mut acc = 0.0;
                for (&si, &wi) in s.iter().zip(&w) {
                    let x = [a[0] + si * (b[0] - a[0]), a[1] + si * (b[1] - a[1])];
                    let gv = g(x);
                    acc += wi * (gv[0] * face.normal[0] + gv[1] * face.normal[1]) * reference::face_poly(j, si);
                }
                out[f * per_face + j] = acc * face.size;
            }
        }
        out
    }

    /// Canonical interpolant: face moments of `u . n_F` plus the reference
    /// interior moments of the pulled-back field. Exact on the space and
    /// commutes with the divergence on affine cells.
    pub fn interpolate(&self, u: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let per_face = self.dofs_per_face();
        let (s, w) = gauss_legendre(12);
        let mut out = vec![0.0; self.n_dofs];
        for (f, face) in self.mesh.faces().iter().enumerate() {
            let a = self.mesh.vertices()[face.vertices[0]];
            let b = self.mesh.vertices()[face.vertices[1]];
            for j in 0..per_face {
                let mut acc = 0.0;
                for (&si, &wi) in s.iter().zip(&w) {
                    let x = [a[0] + si * (b[0] - a[0]), a[1] + si * (b[1] - a[1])];
                    let v = u(x);
                    acc += wi * (v[0] * face.normal[0] + v[1] * face.normal[1]) * reference::face_poly(j, si);
                }
                out[f * per_face + j] = acc * face.size;
            }
        }
        if self.degree > 0 {
            for e in 0..self.mesh.n_elements() {
                let map = ElementMap::new(&self.mesh, e);
                let kind = map.kind;
                let n_edge = kind.n_vertices() * per_face;
                let rule = quadrature::cell_rule(kind, 12);
                let dofs = &self.elem_dofs[e];
                for a in 0..self.reference(kind).n_interior() {
                    let val = rule.integrate(|xi| {
                        let jac = map.jacobian(xi);
                        let v = u(map.map(xi));
                        // Pull back: v_ref = det J J^{-1} v.
                        let r = [
                            jac.det * (jac.inv[0][0] * v[0] + jac.inv[0][1] * v[1]),
                            jac.det * (jac.inv[1][0] * v[0] + jac.inv[1][1] * v[1]),
                        ];
                        let t = reference::interior_tests(kind, xi)[a];
                        r[0] * t[0] + r[1] * t[1]
                    });
                    out[dofs[n_edge + a]] = val;
                }
            }
        }
        out
    }

    /// Global moments `int_F v . n_F L_j ds` of a discrete field on face `f`.
    pub fn face_moments(&self, coeffs: &[f64], f: usize) -> Result<Vec<f64>> {
        let t = self.tabulate_face(f, 0)?;
        let face = self.mesh.face(f);
        let c = self.local_coeffs(coeffs, face.elements.0);
        let (s, _) = self.face_rule();
        Ok((0..self.dofs_per_face())
            .map(|j| {
                (0..t.n_points())
                    .map(|q| {
                        let v = t.value(q, &c);
                        t.jxw[q] * (v[0] * face.normal[0] + v[1] * face.normal[1]) * reference::face_poly(j, s[q])
                    })
                    .sum()
            })
            .collect())
    }

    /// L2 norm of a velocity field.
    pub fn l2_norm(&self, coeffs: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for e in 0..self.mesh.n_elements() {
            let t = self.tabulate_volume(e)?;
            let c = self.local_coeffs(coeffs, e);
            for q in 0..t.n_points() {
                let v = t.value(q, &c);
                s += t.jxw[q] * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        Ok(s.sqrt())
    }

    /// Largest |div u| over all volume quadrature points.
    pub fn max_divergence(&self, coeffs: &[f64]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for e in 0..self.mesh.n_elements() {
            let t = self.tabulate_volume(e)?;
            let c = self.local_coeffs(coeffs, e);
            for q in 0..t.n_points() {
                m = m.max(t.divergence(q, &c).abs());
            }
        }
        Ok(m)
    }

    /// L2 distance between `coeffs` and the function `u` on this mesh.
    pub fn l2_error(&self, coeffs: &[f64], u: &dyn Fn([f64; 2]) -> [f64; 2]) -> Result<f64> {
        let mut s = 0.0;
        for e in 0..self.mesh.n_elements() {
            let t = self.tabulate_volume(e)?;
            let c = self.local_coeffs(coeffs, e);
            for q in 0..t.n_points() {
                let v = t.value(q, &c);
                let w = u(t.points[q]);
                s += t.jxw[q] * ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2));
            }
        }
        Ok(s.sqrt())
    }
}

/// L2 projection of `u0` onto the space; essential normal DOFs take the
/// moments of `g` (pass `u0` itself for data compatible with the boundary).
pub fn l2_project_velocity(
    u0: &dyn Fn([f64; 2]) -> [f64; 2],
    g: &dyn Fn([f64; 2]) -> [f64; 2],
    space: &VelocitySpace,
) -> Result<FieldCoefficients> {
    let mass = crate::assembly::assemble_mass(space)?;
    l2_project_velocity_with(u0, g, space, &mass)
}

/// As [`l2_project_velocity`] with a precomputed mass matrix.
pub fn l2_project_velocity_with(
    u0: &dyn Fn([f64; 2]) -> [f64; 2],
    g: &dyn Fn([f64; 2]) -> [f64; 2],
    space: &VelocitySpace,
    mass: &crate::sparse::Csr,
) -> Result<FieldCoefficients> {
    let mut rhs = vec![0.0; space.n_dofs()];
    for e in 0..space.mesh().n_elements() {
        let t = space.tabulate_volume(e)?;
        let dofs = space.element_dofs(e);
        for q in 0..t.n_points() {
            let u = u0(t.points[q]);
            for (i, &d) in dofs.iter().enumerate() {
                let phi = t.values[q * t.n_basis + i];
                rhs[d] += t.jxw[q] * (u[0] * phi[0] + u[1] * phi[1]);
            }
        }
    }
    let ud = space.dirichlet_values(g);
    let coeffs = crate::linalg::solve_constrained_spd(mass, &rhs, &ud, space)?;
    Ok(FieldCoefficients::new(space.tag(), coeffs, 0.0))
}

/// Fully discontinuous pressure space: P_k on triangles, Q_k on
/// quadrilaterals, mapped by composition with the element map.
#[derive(Debug, Clone)]
pub struct PressureSpace {
    mesh: Arc<Mesh2D>,
    degree: usize,
    tri: ScalarReference,
    quad: ScalarReference,
    offsets: Vec<usize>,
    n_dofs: usize,
    zero_mean: bool,
}

impl PressureSpace {
    pub fn new(mesh: Arc<Mesh2D>, degree: usize, zero_mean: bool) -> Result<Self> {
        let tri = ScalarReference::new(CellKind::Triangle, degree)?;
        let quad = ScalarReference::new(CellKind::Quadrilateral, degree)?;
        let mut offsets = Vec::with_capacity(mesh.n_elements() + 1);
        let mut n = 0;
        for e in 0..mesh.n_elements() {
            offsets.push(n);
            n += match mesh.kind(e) {
                CellKind::Triangle => tri.n_basis(),
                CellKind::Quadrilateral => quad.n_basis(),
            };
        }
        offsets.push(n);
        Ok(PressureSpace {
            mesh,
            degree,
            tri,
            quad,
            offsets,
            n_dofs: n,
            zero_mean,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn zero_mean(&self) -> bool {
        self.zero_mean
    }

    pub fn element_dofs(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn reference(&self, kind: CellKind) -> &ScalarReference {
        match kind {
            CellKind::Triangle => &self.tri,
            CellKind::Quadrilateral => &self.quad,
        }
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag {
            kind: FieldKind::Pressure,
            degree: self.degree,
            n_dofs: self.n_dofs,
            mesh_checksum: self.mesh.checksum().to_string(),
        }
    }

    /// Basis values at reference points: point-major, `n_basis` per point.
    pub fn tabulate(&self, e: usize, ref_points: &[[f64; 2]]) -> Vec<f64> {
        let r = self.reference(self.mesh.kind(e));
        let nb = r.n_basis();
        let mut out = vec![0.0; ref_points.len() * nb];
        for (q, &xi) in ref_points.iter().enumerate() {
            r.eval(xi, &mut out[q * nb..(q + 1) * nb]);
        }
        out
    }

    /// Coefficients of the constant function 1.
    pub fn constant_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_dofs];
        for e in 0..self.mesh.n_elements() {
            c[self.offsets[e]] = 1.0;
        }
        c
    }

    /// `b_i = int q_i dx` for every basis function.
    pub fn integrals(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.n_dofs];
        for e in 0..self.mesh.n_elements() {
            let kind = self.mesh.kind(e);
            let rule = quadrature::cell_rule(kind, self.degree + 2);
            let map = ElementMap::new(&self.mesh, e);
            let vals = self.tabulate(e, &rule.points);
            let nb = self.reference(kind).n_basis();
            for q in 0..rule.len() {
                let jxw = rule.weights[q] * map.jacobian(rule.points[q]).det;
                for i in 0..nb {
                    b[self.offsets[e] + i] += jxw * vals[q * nb + i];
                }
            }
        }
        b
    }

    /// Value of a pressure field at a reference point of element `e`.
    pub fn evaluate(&self, coeffs: &[f64], e: usize, xi: [f64; 2]) -> f64 {
        let vals = self.tabulate(e, &[xi]);
        vals.iter().zip(&coeffs[self.element_dofs(e)]).map(|(v, c)| v * c).sum()
    }

    pub fn zero_field(&self, time: f64) -> FieldCoefficients {
        FieldCoefficients::new(self.tag(), vec![0.0; self.n_dofs], time)
    }
}

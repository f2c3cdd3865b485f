//! Conforming 2D meshes of triangles and quadrilaterals: construction,
//! refinement, face connectivity, and boundary classification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

mod gmsh;
mod traces;

pub use gmsh::{load_gmsh_mesh, parse_gmsh, write_gmsh, write_gmsh_string};
pub use traces::{jump_and_average, JumpKind, JumpValue, Trace};

/// Geometric tolerance used for boundary matching.
pub const GEOM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Triangle,
    Quadrilateral,
}

impl CellKind {
    pub fn n_vertices(self) -> usize {
        match self {
            CellKind::Triangle => 3,
            CellKind::Quadrilateral => 4,
        }
    }
}

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, x1, y0, y1 };
        if !(x1 > x0 && y1 > y0) || !r.width().is_finite() || !r.height().is_finite() {
            return Err(Error::invalid(format!(
                "rectangle ({x0}, {x1}) x ({y0}, {y1}) must have positive width and height"
            )));
        }
        Ok(r)
    }

    pub fn unit() -> Self {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }
}

/// One mesh face (edge). `elements.0` is K1, the element whose outward
/// normal defines `normal`; `elements.1` is K2, absent on the boundary.
#[derive(Debug, Clone)]
pub struct Face {
    /// Global vertex indices, ordered low to high; this fixes the face
    /// parameter direction.
    pub vertices: [usize; 2],
    pub elements: (usize, Option<usize>),
    /// Local edge index of this face in K1 and K2.
    pub local_edges: (usize, Option<usize>),
    pub normal: [f64; 2],
    pub size: f64,
    pub midpoint: [f64; 2],
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.elements.1.is_none()
    }
}

/// Immutable conforming mesh. Element vertices are stored counterclockwise.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    kinds: Vec<CellKind>,
    element_areas: Vec<f64>,
    element_diameters: Vec<f64>,
    faces: Vec<Face>,
    element_faces: Vec<Vec<usize>>,
    mesh_size: f64,
    checksum: String,
}

impl Mesh2D {
    /// Builds a mesh from raw vertices and element connectivity, fixing
    /// orientation and computing faces and geometric quantities.
    pub fn new(vertices: Vec<[f64; 2]>, elements: Vec<Vec<usize>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("mesh has no elements"));
        }
        let mut elements = elements;
        let mut kinds = Vec::with_capacity(elements.len());
        let mut element_areas = Vec::with_capacity(elements.len());
        let mut element_diameters = Vec::with_capacity(elements.len());
        for (e, verts) in elements.iter_mut().enumerate() {
            let kind = match verts.len() {
                3 => CellKind::Triangle,
                4 => CellKind::Quadrilateral,
                n => {
                    return Err(Error::invalid(format!(
                        "element {e} has {n} vertices; only triangles and quadrilaterals are supported"
                    )))
                }
            };
            for &v in verts.iter() {
                if v >= vertices.len() {
                    return Err(Error::invalid(format!(
                        "element {e} references missing vertex {v}"
                    )));
                }
            }
            let mut area = signed_area(&vertices, verts);
            if area < 0.0 {
                verts.reverse();
                area = -area;
            }
            if !(area > 0.0) {
                return Err(Error::Geometry(format!("element {e} has zero area")));
            }
            let mut diam: f64 = 0.0;
            for a in 0..verts.len() {
                for b in (a + 1)..verts.len() {
                    diam = diam.max(dist(vertices[verts[a]], vertices[verts[b]]));
                }
            }
            kinds.push(kind);
            element_areas.push(area);
            element_diameters.push(diam);
        }

        // Faces in order of first appearance; K1 is therefore the smaller element index.
        let mut face_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut element_faces = Vec::with_capacity(elements.len());
        for (e, verts) in elements.iter().enumerate() {
            let n = verts.len();
            let mut ef = Vec::with_capacity(n);
            for l in 0..n {
                let a = verts[l];
                let b = verts[(l + 1) % n];
                let key = (a.min(b), a.max(b));
                match face_of.get(&key) {
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let size = dist(pa, pb);
                        if !(size > 0.0) {
                            return Err(Error::Geometry(format!(
                                "element {e} has a degenerate edge"
                            )));
                        }
                        // Outward normal of a counterclockwise edge a -> b.
                        let normal = [(pb[1] - pa[1]) / size, -(pb[0] - pa[0]) / size];
                        face_of.insert(key, faces.len());
                        ef.push(faces.len());
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            elements: (e, None),
                            local_edges: (l, None),
                            normal,
                            size,
                            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                        });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.elements.1.is_some() {
                            return Err(Error::Geometry(format!(
                                "edge ({}, {}) is shared by more than two elements",
                                key.0, key.1
                            )));
                        }
                        if face.elements.0 == e {
                            return Err(Error::Geometry(format!(
                                "element {e} uses edge ({}, {}) twice",
                                key.0, key.1
                            )));
                        }
                        face.elements.1 = Some(e);
                        face.local_edges.1 = Some(l);
                        ef.push(f);
                    }
                }
            }
            element_faces.push(ef);
        }

        let mesh_size = element_diameters.iter().cloned().fold(0.0, f64::max);
        let checksum = checksum_of(&vertices, &elements);
        Ok(Mesh2D {
            vertices,
            elements,
            kinds,
            element_areas,
            element_diameters,
            faces,
            element_faces,
            mesh_size,
            checksum,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn kind(&self, e: usize) -> CellKind {
        self.kinds[e]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.element_areas[e]
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn element_diameter(&self, e: usize) -> f64 {
        self.element_diameters[e]
    }

    pub fn element_vertices(&self, e: usize) -> Vec<[f64; 2]> {
        self.elements[e].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Area centroid of element `e`.
    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let verts = &self.elements[e];
        let p0 = self.vertices[verts[0]];
        // Fan triangulation from the first vertex.
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a_tot = 0.0;
        for i in 1..verts.len() - 1 {
            let p1 = self.vertices[verts[i]];
            let p2 = self.vertices[verts[i + 1]];
            let a = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
            cx += a * (p0[0] + p1[0] + p2[0]) / 3.0;
            cy += a * (p0[1] + p1[1] + p2[1]) / 3.0;
            a_tot += a;
        }
        [cx / a_tot, cy / a_tot]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Face indices of element `e`, by local edge.
    pub fn element_faces(&self, e: usize) -> &[usize] {
        &self.element_faces[e]
    }

    /// Maximum element diameter.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn min_element_diameter(&self) -> f64 {
        self.element_diameters.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| !self.faces[f].is_boundary())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary())
    }

    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in &self.vertices {
            r.x0 = r.x0.min(p[0]);
            r.x1 = r.x1.max(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.y1 = r.y1.max(p[1]);
        }
        r
    }

    /// Hex SHA-256 over the vertex coordinates and connectivity.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Checks the structural invariants; used by tests and after parsing.
    pub fn validate(&self) -> Result<()> {
        for (e, &a) in self.element_areas.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::Geometry(format!("element {e} has nonpositive area")));
            }
        }
        for (f, face) in self.faces.iter().enumerate() {
            let n = face.normal;
            if ((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::Geometry(format!("face {f} normal is not unit")));
            }
            if let Some(k2) = face.elements.1 {
                if k2 <= face.elements.0 {
                    return Err(Error::Geometry(format!("face {f} orientation convention broken")));
                }
            }
        }
        Ok(())
    }

    /// Outward unit normal of element `e` on its local edge `l`.
    pub fn outward_normal(&self, e: usize, l: usize) -> [f64; 2] {
        let f = self.element_faces[e][l];
        let face = &self.faces[f];
        if face.elements.0 == e {
            face.normal
        } else {
            [-face.normal[0], -face.normal[1]]
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(vertices: &[[f64; 2]], verts: &[usize]) -> f64 {
    let n = verts.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = vertices[verts[i]];
        let q = vertices[verts[(i + 1) % n]];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn checksum_of(vertices: &[[f64; 2]], elements: &[Vec<usize>]) -> String {
    let mut h = Sha256::new();
    for p in vertices {
        h.update(p[0].to_le_bytes());
        h.update(p[1].to_le_bytes());
    }
    for e in elements {
        h.update((e.len() as u64).to_le_bytes());
        for &v in e {
            h.update((v as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// `nx * ny` congruent rectangles covering `domain`, numbered row by row.
pub fn generate_uniform_quad_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh2D> {
    let (vertices, _) = grid_vertices(nx, ny, domain)?;
    let mut elements = Vec::with_capacity(nx * ny);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh2D::new(vertices, elements)
}

/// `2 * nx * ny` right triangles: each grid rectangle split along alternating
/// diagonals.
pub fn generate_uniform_tri_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh2D> {
    let (vertices, _) = grid_vertices(nx, ny, domain)?;
    Ok(split_grid_into_triangles(vertices, nx, ny)?)
}

fn grid_vertices(nx: usize, ny: usize, domain: Rect) -> Result<(Vec<[f64; 2]>, ())> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("mesh dimensions must be positive, got {nx} x {ny}")));
    }
    let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
    let xs: Vec<f64> = (0..=nx)
        .map(|i| domain.x0 + domain.width() * i as f64 / nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|j| domain.y0 + domain.height() * j as f64 / ny as f64)
        .collect();
    Ok((tensor_vertices(&xs, &ys), ()))
}

fn tensor_vertices(xs: &[f64], ys: &[f64]) -> Vec<[f64; 2]> {
    let mut v = Vec::with_capacity(xs.len() * ys.len());
    for &y in ys {
        for &x in xs {
            v.push([x, y]);
        }
    }
    v
}

fn split_grid_into_triangles(vertices: Vec<[f64; 2]>, nx: usize, ny: usize) -> Result<Mesh2D> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                elements.push(vec![a, b, c]);
                elements.push(vec![a, c, d]);
            } else {
                elements.push(vec![a, b, d]);
                elements.push(vec![b, c, d]);
            }
        }
    }
    Mesh2D::new(vertices, elements)
}

/// Triangulated channel mesh graded toward the walls and the inflow edge.
///
/// `h_min` is the spacing at the walls/inlet and `h_max` the spacing in the
/// bulk; spacing grows geometrically with ratio `growth` away from the walls.
pub fn generate_graded_channel_mesh(
    domain: Rect,
    h_min: f64,
    h_max: f64,
    growth: f64,
) -> Result<Mesh2D> {
    if !(h_min > 0.0 && h_max >= h_min && growth > 1.0) {
        return Err(Error::invalid("graded mesh needs 0 < h_min <= h_max and growth > 1"));
    }
    let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
    let xs = graded_coordinates(domain.x0, domain.x1, h_min, h_max, growth, false);
    let ys = graded_coordinates(domain.y0, domain.y1, h_min, h_max, growth, true);
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    split_grid_into_triangles(tensor_vertices(&xs, &ys), nx, ny)
}

/// Breakpoints on `[a, b]` with spacing `h_min` at `a` (and at `b` when
/// `both_ends`) growing geometrically to at most `h_max`.
fn graded_coordinates(a: f64, b: f64, h_min: f64, h_max: f64, growth: f64, both_ends: bool) -> Vec<f64> {
    let len = b - a;
    // Spacing as a function of distance to the refined end(s).
    let spacing = |d: f64| -> f64 {
        // Geometric growth h_min * g^k reaches distance h_min (g^k - 1)/(g - 1).
        let k = ((d * (growth - 1.0) / h_min) + 1.0).ln() / growth.ln();
        (h_min * growth.powf(k)).min(h_max)
    };
    let mut pts = vec![0.0];
    let mut x: f64 = 0.0;
    while x < len * (1.0 - 1e-12) {
        let d = if both_ends { x.min(len - x) } else { x };
        x += spacing(d.max(0.0));
        pts.push(x);
    }
    // Shrink uniformly so the overshooting last point lands on `b`.
    let scale = len / x;
    let mut out: Vec<f64> = pts.iter().map(|&p| a + p * scale).collect();
    *out.last_mut().unwrap() = b;
    out
}

/// Conforming uniform refinement: every element into four children via edge
/// midpoints (and the element center for quadrilaterals).
pub fn uniform_refine(mesh: &Mesh2D) -> Result<Mesh2D> {
    let mut vertices = mesh.vertices.clone();
    let face_mid: Vec<usize> = mesh
        .faces
        .iter()
        .map(|f| {
            vertices.push(f.midpoint);
            vertices.len() - 1
        })
        .collect();
    let mut elements = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let v = &mesh.elements[e];
        let m: Vec<usize> = mesh.element_faces[e].iter().map(|&f| face_mid[f]).collect();
        match mesh.kinds[e] {
            CellKind::Triangle => {
                // m[l] is the midpoint of edge (v[l], v[l+1]).
                elements.push(vec![v[0], m[0], m[2]]);
                elements.push(vec![m[0], v[1], m[1]]);
                elements.push(vec![m[2], m[1], v[2]]);
                elements.push(vec![m[0], m[1], m[2]]);
            }
            CellKind::Quadrilateral => {
                let p: Vec<[f64; 2]> = v.iter().map(|&i| mesh.vertices[i]).collect();
                let c = [
                    0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
                    0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
                ];
                vertices.push(c);
                let c = vertices.len() - 1;
                elements.push(vec![v[0], m[0], c, m[3]]);
                elements.push(vec![m[0], v[1], m[1], c]);
                elements.push(vec![c, m[1], v[2], m[2]]);
                elements.push(vec![m[3], c, m[2], v[3]]);
            }
        }
    }
    Mesh2D::new(vertices, elements)
}

/// Side of an axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Outflow,
}

/// Boundary condition on the half-open parameter interval `[from, to)` of a
/// rectangle side; the parameter is x for bottom/top and y for left/right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRule {
    pub side: Side,
    pub from: f64,
    pub to: f64,
    pub kind: BoundaryKind,
}

/// Geometric boundary classification for a rectangular domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub domain: Rect,
    pub rules: Vec<SegmentRule>,
}

impl BoundarySpec {
    pub fn whole_side(domain: Rect, side: Side, kind: BoundaryKind) -> SegmentRule {
        let (from, to) = match side {
            Side::Left | Side::Right => (domain.y0, domain.y1),
            Side::Bottom | Side::Top => (domain.x0, domain.x1),
        };
        SegmentRule {
            side,
            from,
            to: to + 2.0 * GEOM_TOL,
            kind,
        }
    }

    pub fn all_dirichlet(domain: Rect) -> Self {
        let rules = [Side::Left, Side::Right, Side::Bottom, Side::Top]
            .into_iter()
            .map(|s| Self::whole_side(domain, s, BoundaryKind::Dirichlet))
            .collect();
        BoundarySpec { domain, rules }
    }

    /// Walls and inflow are Dirichlet; the right edge is an outflow.
    pub fn channel(domain: Rect) -> Self {
        let mut spec = Self::all_dirichlet(domain);
        spec.rules[1].kind = BoundaryKind::Outflow;
        spec
    }

    /// Which side of the domain a boundary point lies on, with its parameter.
    fn locate(&self, p: [f64; 2]) -> Vec<(Side, f64)> {
        let d = &self.domain;
        let mut out = Vec::new();
        if (p[0] - d.x0).abs() <= GEOM_TOL {
            out.push((Side::Left, p[1]));
        }
        if (p[0] - d.x1).abs() <= GEOM_TOL {
            out.push((Side::Right, p[1]));
        }
        if (p[1] - d.y0).abs() <= GEOM_TOL {
            out.push((Side::Bottom, p[0]));
        }
        if (p[1] - d.y1).abs() <= GEOM_TOL {
            out.push((Side::Top, p[0]));
        }
        out
    }

    /// Boundary kind for the face midpoint `p`.
    pub fn classify_point(&self, p: [f64; 2]) -> Result<BoundaryKind> {
        let mut hits = Vec::new();
        for (side, t) in self.locate(p) {
            for rule in &self.rules {
                if rule.side == side && t >= rule.from - GEOM_TOL && t < rule.to - GEOM_TOL {
                    hits.push(rule.kind);
                }
            }
        }
        match hits.as_slice() {
            [k] => Ok(*k),
            [] => Err(Error::Classification(format!(
                "boundary face with midpoint ({:.12}, {:.12}) is not covered by any segment rule",
                p[0], p[1]
            ))),
            _ => Err(Error::Classification(format!(
                "boundary face with midpoint ({:.12}, {:.12}) is covered by {} segment rules",
                p[0],
                p[1],
                hits.len()
            ))),
        }
    }
}

/// Partition of the faces into interior, Dirichlet and outflow sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceSets {
    pub interior: Vec<usize>,
    pub dirichlet: Vec<usize>,
    pub outflow: Vec<usize>,
}

impl FaceSets {
    /// Every boundary face Dirichlet, for domains that are not rectangles.
    pub fn all_dirichlet(mesh: &Mesh2D) -> Self {
        FaceSets {
            interior: mesh.interior_faces().collect(),
            dirichlet: mesh.boundary_faces().collect(),
            outflow: Vec::new(),
        }
    }

    pub fn has_outflow(&self) -> bool {
        !self.outflow.is_empty()
    }

    /// Per-face lookup: `Some(kind)` for boundary faces.
    pub fn boundary_kinds(&self, n_faces: usize) -> Vec<Option<BoundaryKind>> {
        let mut v = vec![None; n_faces];
        for &f in &self.dirichlet {
            v[f] = Some(BoundaryKind::Dirichlet);
        }
        for &f in &self.outflow {
            v[f] = Some(BoundaryKind::Outflow);
        }
        v
    }
}

pub fn classify_faces(mesh: &Mesh2D, spec: &BoundarySpec) -> Result<FaceSets> {
    let mut sets = FaceSets {
        interior: Vec::new(),
        dirichlet: Vec::new(),
        outflow: Vec::new(),
    };
    for (f, face) in mesh.faces().iter().enumerate() {
        if !face.is_boundary() {
            sets.interior.push(f);
            continue;
        }
        match spec.classify_point(face.midpoint)? {
            BoundaryKind::Dirichlet => sets.dirichlet.push(f),
            BoundaryKind::Outflow => sets.outflow.push(f),
        }
    }
    Ok(sets)
}

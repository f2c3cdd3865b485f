//! Reference-to-physical element maps and the contravariant Piola transform.

use crate::error::{Error, Result};
use crate::mesh::{CellKind, Mesh2D};

/// Affine (triangle) or bilinear (quadrilateral) map of the reference cell.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub kind: CellKind,
    p: [[f64; 2]; 4],
}

/// Jacobian data at one reference point. `dj[k]` is the derivative of the
/// Jacobian along reference direction `k`; zero for affine maps.
#[derive(Debug, Clone, Copy)]
pub struct Jacobian {
    pub j: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
    pub dj: [[[f64; 2]; 2]; 2],
    pub ddet: [f64; 2],
}

impl ElementMap {
    pub fn new(mesh: &Mesh2D, e: usize) -> Self {
        let mut p = [[0.0; 2]; 4];
        for (slot, &v) in p.iter_mut().zip(mesh.element(e)) {
            *slot = mesh.vertices()[v];
        }
        ElementMap {
            kind: mesh.kind(e),
            p,
        }
    }

    pub fn from_vertices(kind: CellKind, verts: &[[f64; 2]]) -> Self {
        let mut p = [[0.0; 2]; 4];
        p[..verts.len()].copy_from_slice(verts);
        ElementMap { kind, p }
    }

    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let p = &self.p;
        match self.kind {
            CellKind::Triangle => [
                p[0][0] + (p[1][0] - p[0][0]) * xi[0] + (p[2][0] - p[0][0]) * xi[1],
                p[0][1] + (p[1][1] - p[0][1]) * xi[0] + (p[2][1] - p[0][1]) * xi[1],
            ],
            CellKind::Quadrilateral => {
                let n = [
                    (1.0 - xi[0]) * (1.0 - xi[1]),
                    xi[0] * (1.0 - xi[1]),
                    xi[0] * xi[1],
                    (1.0 - xi[0]) * xi[1],
                ];
                let mut x = [0.0; 2];
                for i in 0..4 {
                    x[0] += n[i] * p[i][0];
                    x[1] += n[i] * p[i][1];
                }
                x
            }
        }
    }

    pub fn jacobian(&self, xi: [f64; 2]) -> Jacobian {
        let p = &self.p;
        let (j, dj) = match self.kind {
            CellKind::Triangle => (
                [
                    [p[1][0] - p[0][0], p[2][0] - p[0][0]],
                    [p[1][1] - p[0][1], p[2][1] - p[0][1]],
                ],
                [[[0.0; 2]; 2]; 2],
            ),
            CellKind::Quadrilateral => {
                let c = [
                    p[0][0] - p[1][0] + p[2][0] - p[3][0],
                    p[0][1] - p[1][1] + p[2][1] - p[3][1],
                ];
                let a = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
                let b = [p[3][0] - p[0][0], p[3][1] - p[0][1]];
                (
                    [
                        [a[0] + c[0] * xi[1], b[0] + c[0] * xi[0]],
                        [a[1] + c[1] * xi[1], b[1] + c[1] * xi[0]],
                    ],
                    [[[0.0, c[0]], [0.0, c[1]]], [[c[0], 0.0], [c[1], 0.0]]],
                )
            }
        };
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let mut ddet = [0.0; 2];
        for k in 0..2 {
            let d = &dj[k];
            ddet[k] = d[0][0] * j[1][1] + j[0][0] * d[1][1] - d[0][1] * j[1][0] - j[0][1] * d[1][0];
        }
        Jacobian {
            j,
            det,
            inv,
            dj,
            ddet,
        }
    }

    /// Reference coordinates of physical point `x` (Newton for bilinear maps).
    pub fn inverse(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let mut xi = match self.kind {
            CellKind::Triangle => [1.0 / 3.0; 2],
            CellKind::Quadrilateral => [0.5; 2],
        };
        let iters = if self.kind == CellKind::Triangle { 1 } else { 30 };
        for _ in 0..iters {
            let f = self.map(xi);
            let r = [x[0] - f[0], x[1] - f[1]];
            let jac = self.jacobian(xi);
            if !(jac.det.abs() > 0.0) {
                return None;
            }
            let d = [
                jac.inv[0][0] * r[0] + jac.inv[0][1] * r[1],
                jac.inv[1][0] * r[0] + jac.inv[1][1] * r[1],
            ];
            xi[0] += d[0];
            xi[1] += d[1];
            if d[0].abs() + d[1].abs() < 1e-15 {
                break;
            }
        }
        let f = self.map(xi);
        let scale = 1.0 + x[0].abs() + x[1].abs();
        ((x[0] - f[0]).abs() + (x[1] - f[1]).abs() <= 1e-12 * scale).then_some(xi)
    }
}

/// Whether reference point `xi` lies in the reference cell, with slack `tol`.
pub fn in_reference(kind: CellKind, xi: [f64; 2], tol: f64) -> bool {
    match kind {
        CellKind::Triangle => xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol,
        CellKind::Quadrilateral => {
            xi[0] >= -tol && xi[1] >= -tol && xi[0] <= 1.0 + tol && xi[1] <= 1.0 + tol
        }
    }
}

/// Contravariant Piola transform of reference values: `J v / det J`.
pub fn piola_transform(jac: &Jacobian, reference_values: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    if !(jac.det > 0.0) {
        return Err(Error::Geometry(format!(
            "element map has nonpositive Jacobian determinant {}",
            jac.det
        )));
    }
    Ok(reference_values.iter().map(|v| piola_value(jac, *v)).collect())
}

#[inline]
pub fn piola_value(jac: &Jacobian, v: [f64; 2]) -> [f64; 2] {
    let j = &jac.j;
    [
        (j[0][0] * v[0] + j[0][1] * v[1]) / jac.det,
        (j[1][0] * v[0] + j[1][1] * v[1]) / jac.det,
    ]
}

/// Physical gradient of a Piola-mapped field from its reference value and
/// reference gradient, including the variation of `J` on bilinear cells.
#[inline]
pub fn piola_gradient(jac: &Jacobian, v: [f64; 2], g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let j = &jac.j;
    let det = jac.det;
    // gref[i][k] = d/dxi_k (J v / det)_i
    let mut gref = [[0.0; 2]; 2];
    for i in 0..2 {
        let jv = j[i][0] * v[0] + j[i][1] * v[1];
        for k in 0..2 {
            let djv = jac.dj[k][i][0] * v[0] + jac.dj[k][i][1] * v[1];
            let jdv = j[i][0] * g[0][k] + j[i][1] * g[1][k];
            gref[i][k] = (djv + jdv) / det - jv * jac.ddet[k] / (det * det);
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for c in 0..2 {
            out[i][c] = gref[i][0] * jac.inv[0][c] + gref[i][1] * jac.inv[1][c];
        }
    }
    out
}

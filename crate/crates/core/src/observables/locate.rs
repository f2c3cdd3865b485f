//! Point location on unstructured meshes through a bucket grid of element
//! bounding boxes.

use std::sync::Arc;

use crate::mesh::{Mesh2D, Rect};
use crate::spaces::geometry::{in_reference, ElementMap};

/// Slack on reference coordinates when testing containment.
const REF_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PointLocator {
    mesh: Arc<Mesh2D>,
    domain: Rect,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    maps: Vec<ElementMap>,
}

impl PointLocator {
    pub fn new(mesh: Arc<Mesh2D>) -> Self {
        let domain = mesh.bounding_box();
        let side = (mesh.n_elements() as f64).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (side, side);
        let mut buckets = vec![Vec::new(); nx * ny];
        let maps: Vec<ElementMap> = (0..mesh.n_elements()).map(|e| ElementMap::new(&mesh, e)).collect();
        let bucket = |v: f64, lo: f64, len: f64, n: usize| -> usize {
            (((v - lo) / len * n as f64).floor().max(0.0) as usize).min(n - 1)
        };
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in &verts {
                x0 = x0.min(p[0]);
                x1 = x1.max(p[0]);
                y0 = y0.min(p[1]);
                y1 = y1.max(p[1]);
            }
            let pad_x = 1e-9 * domain.width();
            let pad_y = 1e-9 * domain.height();
            let (i0, i1) = (
                bucket(x0 - pad_x, domain.x0, domain.width(), nx),
                bucket(x1 + pad_x, domain.x0, domain.width(), nx),
            );
            let (j0, j1) = (
                bucket(y0 - pad_y, domain.y0, domain.height(), ny),
                bucket(y1 + pad_y, domain.y0, domain.height(), ny),
            );
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(e);
                }
            }
        }
        PointLocator {
            mesh,
            domain,
            nx,
            ny,
            buckets,
            maps,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    fn candidates(&self, x: [f64; 2]) -> &[usize] {
        let d = &self.domain;
        let fx = (x[0] - d.x0) / d.width() * self.nx as f64;
        let fy = (x[1] - d.y0) / d.height() * self.ny as f64;
        let slack = 1e-9 * (self.nx + self.ny) as f64;
        if fx < -slack || fy < -slack || fx > self.nx as f64 + slack || fy > self.ny as f64 + slack {
            return &[];
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        &self.buckets[j * self.nx + i]
    }

    /// Every element containing `x`, in ascending order, with the reference
    /// coordinates of `x`. Points on shared faces or vertices return all
    /// adjacent elements.
    pub fn locate_all(&self, x: [f64; 2]) -> Vec<(usize, [f64; 2])> {
        self.candidates(x)
            .iter()
            .filter_map(|&e| {
                let map = &self.maps[e];
                map.inverse(x)
                    .filter(|&xi| in_reference(map.kind, xi, REF_TOL))
                    .map(|xi| (e, xi))
            })
            .collect()
    }

    /// Lowest-numbered element containing `x`.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        self.locate_all(x).into_iter().next()
    }

    /// Reference coordinates of `x` in element `e`, if `x` lies in it.
    pub fn reference_point(&self, e: usize, x: [f64; 2]) -> Option<[f64; 2]> {
        let map = &self.maps[e];
        map.inverse(x).filter(|&xi| in_reference(map.kind, xi, REF_TOL))
    }
}

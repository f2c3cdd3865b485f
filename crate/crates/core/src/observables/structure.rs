//! Structure functions of element-averaged velocity ensembles via a uniform
//! cell grid (fixed-radius neighbour search).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, Rect};
use crate::par::Exec;

/// One mesh element as stored in a grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HashEntry {
    pub id: usize,
    pub area: f64,
    pub centroid: [f64; 2],
    pub velocity: [f64; 2],
}

/// Elements bucketed by centroid into an `nx x ny` grid over `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid {
    domain: Rect,
    nx: usize,
    ny: usize,
    /// Row-major over `(i, j)`: index `j * nx + i`.
    cells: Vec<Vec<HashEntry>>,
}

/// Cell of point `x` by the floor formulas.
fn cell_of(domain: &Rect, nx: usize, ny: usize, x: [f64; 2]) -> Result<(usize, usize)> {
    let fi = (nx as f64 * (x[0] - domain.x0) / (domain.x1 - domain.x0)).floor();
    let fj = (ny as f64 * (x[1] - domain.y0) / (domain.y1 - domain.y0)).floor();
    if !(fi >= 0.0 && fi < nx as f64 && fj >= 0.0 && fj < ny as f64) {
        return Err(Error::Geometry(format!(
            "centroid ({}, {}) lies outside the hashing rectangle",
            x[0], x[1]
        )));
    }
    Ok((fi as usize, fj as usize))
}

/// Grid dimensions for offset `r`: `max(3, floor(side / r))` per direction.
pub fn grid_size(domain: &Rect, r: f64) -> Result<(usize, usize)> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("offset must be positive, got {r}")));
    }
    let n = |side: f64| ((side / r).floor() as usize).max(3);
    Ok((n(domain.width()), n(domain.height())))
}

pub fn make_hash_table(domain: Rect, mesh: &Mesh2D, nx: usize, ny: usize) -> Result<HashGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("hash grid needs at least one cell per direction"));
    }
    let mut cells = vec![Vec::new(); nx * ny];
    for e in 0..mesh.n_elements() {
        let c = mesh.centroid(e);
        let (i, j) = cell_of(&domain, nx, ny, c)?;
        cells[j * nx + i].push(HashEntry {
            id: e,
            area: mesh.element_area(e),
            centroid: c,
            velocity: [0.0; 2],
        });
    }
    Ok(HashGrid { domain, nx, ny, cells })
}

/// Writes the element averages `avg` into the velocity slots.
pub fn update_hash_table(grid: &mut HashGrid, mesh: &Mesh2D, avg: &[[f64; 2]]) -> Result<()> {
    if avg.len() != mesh.n_elements() {
        return Err(Error::contract(format!(
            "{} averages for {} elements",
            avg.len(),
            mesh.n_elements()
        )));
    }
    for (e, v) in avg.iter().enumerate() {
        let (i, j) = cell_of(&grid.domain, grid.nx, grid.ny, mesh.centroid(e))?;
        let entry = grid.cells[j * grid.nx + i]
            .iter_mut()
            .find(|t| t.id == e)
            .ok_or_else(|| Error::Corruption(format!("element {e} missing from cell ({i}, {j})")))?;
        entry.velocity = *v;
    }
    Ok(())
}

impl HashGrid {
    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell(&self, i: usize, j: usize) -> &[HashEntry] {
        &self.cells[j * self.nx + i]
    }

    pub fn n_entries(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

/// Un-rooted structure function of one element-averaged sample.
pub fn structure_function_of_sample(grid: &HashGrid, r: f64, p: f64) -> Result<f64> {
    let (nx, ny) = grid.dims();
    if nx < 3 || ny < 3 {
        return Err(Error::invalid(format!("a {nx}x{ny} grid has no interior cells")));
    }
    if !(p > 0.0) || !(r > 0.0) {
        return Err(Error::invalid("offset and degree must be positive"));
    }
    let d = &grid.domain;
    let slack = 1.0 - 1e-12;
    if d.width() / (nx as f64) < r * slack || d.height() / (ny as f64) < r * slack {
        return Err(Error::invalid(format!("grid cells are smaller than the offset {r}")));
    }
    let mut total = 0.0;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            for k in grid.cell(i, j) {
                let mut sum = 0.0;
                let mut w = 0.0;
                for jj in j - 1..=j + 1 {
                    for ii in i - 1..=i + 1 {
                        for kp in grid.cell(ii, jj) {
                            if (k.centroid[0] - kp.centroid[0]).abs() <= r && (k.centroid[1] - kp.centroid[1]).abs() <= r {
                                let dv0 = (k.velocity[0] - kp.velocity[0]).abs();
                                let dv1 = (k.velocity[1] - kp.velocity[1]).abs();
                                sum += kp.area * (dv0.powf(p) + dv1.powf(p));
                                w += kp.area;
                            }
                        }
                    }
                }
                debug_assert!(w > 0.0, "an element always matches itself");
                total += k.area * (sum / w);
            }
        }
    }
    Ok(total)
}

/// Rooted ensemble structure function: `((1/M) sum_m S_m)^(1/p)`.
///
/// Workers privatize a copy of the grid; per-member values are reduced in
/// member order.
#[allow(clippy::too_many_arguments)]
pub fn structure_function_ensemble(
    domain: Rect,
    mesh: &Mesh2D,
    nx: usize,
    ny: usize,
    avg_fields: &[Vec<[f64; 2]>],
    r: f64,
    p: f64,
    exec: Exec,
) -> Result<f64> {
    if avg_fields.is_empty() {
        return Err(Error::invalid("structure function of an empty ensemble"));
    }
    let grid = make_hash_table(domain, mesh, nx, ny)?;
    let per_member = exec.try_map(avg_fields.len(), |m| {
        let mut g = grid.clone();
        update_hash_table(&mut g, mesh, &avg_fields[m])?;
        structure_function_of_sample(&g, r, p)
    })?;
    let sum: f64 = per_member.iter().sum();
    Ok((sum / avg_fields.len() as f64).powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunctionResult {
    pub p: f64,
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    pub samples: usize,
}

/// Structure function at several offsets on one grid sized for the largest
/// offset, so every offset integrates over the same interior cells.
pub fn structure_function_curve(
    domain: Rect,
    mesh: &Mesh2D,
    avg_fields: &[Vec<[f64; 2]>],
    offsets: &[f64],
    p: f64,
    exec: Exec,
) -> Result<StructureFunctionResult> {
    let r_max = offsets.iter().copied().fold(f64::NAN, f64::max);
    let (nx, ny) = grid_size(&domain, r_max)?;
    let values = offsets
        .iter()
        .map(|&r| structure_function_ensemble(domain, mesh, nx, ny, avg_fields, r, p, exec))
        .collect::<Result<Vec<_>>>()?;
    Ok(StructureFunctionResult {
        p,
        offsets: offsets.to_vec(),
        values,
        samples: avg_fields.len(),
    })
}

/// CSV with columns `r,p,S`.
pub fn write_structure_csv(path: &Path, results: &[StructureFunctionResult]) -> Result<()> {
    let mut s = String::from("r,p,S\n");
    for res in results {
        for (r, v) in res.offsets.iter().zip(&res.values) {
            let _ = writeln!(s, "{r:e},{},{v:e}", res.p);
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

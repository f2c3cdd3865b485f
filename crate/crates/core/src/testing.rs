//! Shared fixtures for unit tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{
    classify_faces, generate_uniform_quad_mesh, generate_uniform_tri_mesh, BoundarySpec, Mesh2D, Rect,
};
use crate::spaces::geometry::{in_reference, ElementMap};
use crate::spaces::{PressureSpace, VelocitySpace};

/// Uniform mesh with interior vertices jittered by up to `amount * h`.
pub fn perturbed(mesh: &Mesh2D, amount: f64, seed: u64) -> Mesh2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bb = mesh.bounding_box();
    let h = mesh.min_element_diameter() / 2.0;
    let verts: Vec<[f64; 2]> = mesh
        .vertices()
        .iter()
        .map(|&p| {
            let on_boundary = (p[0] - bb.x0).abs() < 1e-12
                || (p[0] - bb.x1).abs() < 1e-12
                || (p[1] - bb.y0).abs() < 1e-12
                || (p[1] - bb.y1).abs() < 1e-12;
            if on_boundary {
                p
            } else {
                [
                    p[0] + amount * h * rng.random_range(-1.0..1.0),
                    p[1] + amount * h * rng.random_range(-1.0..1.0),
                ]
            }
        })
        .collect();
    Mesh2D::new(verts, mesh.elements().to_vec()).unwrap()
}

pub fn quad_mesh(n: usize) -> Arc<Mesh2D> {
    Arc::new(generate_uniform_quad_mesh(n, n, Rect::unit()).unwrap())
}

pub fn tri_mesh(n: usize) -> Arc<Mesh2D> {
    Arc::new(generate_uniform_tri_mesh(n, n, Rect::unit()).unwrap())
}

pub fn distorted_quad_mesh(n: usize) -> Arc<Mesh2D> {
    Arc::new(perturbed(&generate_uniform_quad_mesh(n, n, Rect::unit()).unwrap(), 0.3, 7))
}

pub fn distorted_tri_mesh(n: usize) -> Arc<Mesh2D> {
    Arc::new(perturbed(&generate_uniform_tri_mesh(n, n, Rect::unit()).unwrap(), 0.3, 11))
}

pub fn dirichlet_space(mesh: &Arc<Mesh2D>, k: usize) -> VelocitySpace {
    let sets = classify_faces(mesh, &BoundarySpec::all_dirichlet(mesh.bounding_box())).unwrap();
    VelocitySpace::new(mesh.clone(), k, sets).unwrap()
}

pub fn pressure_space(mesh: &Arc<Mesh2D>, k: usize) -> PressureSpace {
    PressureSpace::new(mesh.clone(), k, true).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Element containing `x` (first match for points on shared faces).
pub fn locate(mesh: &Mesh2D, x: [f64; 2]) -> usize {
    (0..mesh.n_elements())
        .find(|&e| {
            let m = ElementMap::new(mesh, e);
            m.inverse(x).is_some_and(|xi| in_reference(m.kind, xi, 1e-10))
        })
        .unwrap()
}

/// Minimal transport cost by a dense two-phase simplex (Bland's rule) on
/// the full LP `min <c, x>` with row sums `a`, column sums `b`, `x >= 0`.
pub fn transport_lp(cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let nv = n * m;
    // Equality rows: n row sums, m column sums; one artificial per row.
    let rows = n + m;
    let cols = nv + rows;
    let mut t = vec![vec![0.0; cols + 1]; rows];
    for i in 0..n {
        for j in 0..m {
            t[i][i * m + j] = 1.0;
            t[n + j][i * m + j] = 1.0;
        }
    }
    for r in 0..rows {
        t[r][nv + r] = 1.0;
        t[r][cols] = if r < n { a[r] } else { b[r - n] };
    }
    let mut basis: Vec<usize> = (nv..cols).collect();
    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, c: &[f64], allowed: usize| {
        loop {
            // Reduced costs for the current basis.
            let entering = (0..allowed).find(|&j| {
                if basis.contains(&j) {
                    return false;
                }
                let z: f64 = (0..rows).map(|r| c[basis[r]] * t[r][j]).sum();
                c[j] - z < -1e-12
            });
            let Some(j) = entering else { break };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..rows {
                if t[r][j] > 1e-12 {
                    let ratio = t[r][cols] / t[r][j];
                    let better = match best {
                        None => true,
                        Some((br, bi)) => ratio < br - 1e-14 || (ratio <= br + 1e-14 && basis[r] < basis[bi]),
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            let (_, r) = best.expect("transport LP is bounded");
            let piv = t[r][j];
            t[r].iter_mut().for_each(|v| *v /= piv);
            for k in 0..rows {
                if k != r && t[k][j] != 0.0 {
                    let f = t[k][j];
                    let row = t[r].clone();
                    t[k].iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
                }
            }
            basis[r] = j;
        }
    };
    let mut phase1 = vec![0.0; cols];
    phase1[nv..].iter_mut().for_each(|v| *v = 1.0);
    run(&mut t, &mut basis, &phase1, cols);
    // Drive remaining (zero-valued) artificials out where possible.
    for r in 0..rows {
        if basis[r] >= nv {
            if let Some(j) = (0..nv).find(|&j| t[r][j].abs() > 1e-12 && !basis.contains(&j)) {
                let piv = t[r][j];
                t[r].iter_mut().for_each(|v| *v /= piv);
                for k in 0..rows {
                    if k != r && t[k][j] != 0.0 {
                        let f = t[k][j];
                        let row = t[r].clone();
                        t[k].iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
                    }
                }
                basis[r] = j;
            }
        }
    }
    let mut phase2 = vec![0.0; cols];
    phase2[..nv].copy_from_slice(cost);
    phase2[nv..].iter_mut().for_each(|v| *v = 1e6);
    run(&mut t, &mut basis, &phase2, nv);
    (0..rows).filter(|&r| basis[r] < nv).map(|r| cost[basis[r]] * t[r][cols]).sum()
}

/// Minimal assignment cost by enumerating all permutations.
pub fn assignment_by_enumeration(cost: &[f64], n: usize) -> f64 {
    fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
    best
}

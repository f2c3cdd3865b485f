//! Exact discrete optimal transport and the 1-point / 2-point Wasserstein
//! distances between velocity ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PointLocator;
use crate::error::{Error, Result};
use crate::mc::Ensemble;
use crate::mesh::Rect;
use crate::par::Exec;

/// Largest replicated problem solved by assignment when uniform atom counts
/// differ; larger ones go through the min-cost flow.
const MAX_REPLICATED: usize = 256;

/// Discrete measure: atoms in `R^dim` with nonnegative weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl Atoms {
    /// Equal weights `1/n` on the given points.
    pub fn uniform(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::InvalidMeasure("a measure needs at least one atom of positive dimension".into()));
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::InvalidMeasure(format!("atom of dimension {} in a {dim}-d measure", p.len())));
            }
            coords.extend_from_slice(p);
        }
        let n = points.len();
        Ok(Atoms {
            dim,
            coords,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// Arbitrary weights; `coords` is atom-major.
    pub fn weighted(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() || coords.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not describe {} atoms in R^{dim}",
                coords.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Atoms {
            dim,
            coords,
            weights,
            uniform: false,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Optimal assignment for a square `n x n` cost matrix (row-major).
/// Returns the minimal total cost and the column assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i * n + assignment[i]]).sum();
    (total, assignment)
}

/// Minimal transport cost between supplies `a` and demands `b` (equal
/// totals) by successive shortest augmenting paths.
pub fn transport_min_cost_flow(cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m, "cost matrix must be n x m");
    const EPS: f64 = 1e-15;
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0; n * m];
    let nodes = n + m;
    // Relative slack keeps rounding-level ties from cycling.
    let improves = |d: f64, current: f64| d < current - 1e-13 * (1.0 + d.abs());
    loop {
        let remaining: f64 = supply.iter().sum();
        if remaining <= EPS * n as f64 || !supply.iter().any(|&s| s > EPS) || !demand.iter().any(|&d| d > EPS) {
            break;
        }
        // Bellman-Ford from every source with supply left; residual arcs are
        // source->sink (cost c) and sink->source where flow > 0 (cost -c).
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        for i in 0..n {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let d = dist[i] + cost[i * m + j];
                        if improves(d, dist[n + j]) {
                            dist[n + j] = d;
                            pred[n + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[i * m + j] > EPS {
                            let d = dist[n + j] - cost[i * m + j];
                            if improves(d, dist[i]) {
                                dist[i] = d;
                                pred[i] = n + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(sink) = (0..m)
            .filter(|&j| demand[j] > EPS && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]))
        else {
            break;
        };
        // Walk back to the originating source and find the bottleneck.
        let mut path = vec![n + sink];
        let mut node = n + sink;
        let mut bottleneck = demand[sink];
        while pred[node] != usize::MAX {
            let prev = pred[node];
            if node < n {
                // sink `prev` -> source `node` undoes flow on (node, prev).
                bottleneck = bottleneck.min(flow[node * m + (prev - n)]);
            }
            path.push(prev);
            node = prev;
        }
        bottleneck = bottleneck.min(supply[node]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < n {
                flow[from * m + (to - n)] += bottleneck;
            } else {
                flow[to * m + (from - n)] -= bottleneck;
            }
        }
        supply[node] -= bottleneck;
        demand[sink] -= bottleneck;
    }
    flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact `p`-Wasserstein distance between two discrete measures with ground
/// cost `|x - y|_2^p`.
pub fn emd(a: &Atoms, b: &Atoms, p: f64) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::InvalidMeasure(format!("atoms in R^{} and R^{}", a.dim, b.dim)));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("Wasserstein order must be >= 1, got {p}")));
    }
    let (n, m) = (a.len(), b.len());
    let cost_of = |i: usize, j: usize| {
        let d = distance(a.atom(i), b.atom(j));
        if p == 1.0 {
            d
        } else {
            d.powf(p)
        }
    };
    let total = if a.uniform && b.uniform && n * m / gcd(n, m) <= MAX_REPLICATED {
        // Uniform measures: replicate each atom up to the common multiple and
        // solve an assignment problem.
        let l = n * m / gcd(n, m);
        let (ra, rb) = (l / n, l / m);
        let mut cost = vec![0.0; l * l];
        for i in 0..l {
            for j in 0..l {
                cost[i * l + j] = cost_of(i / ra, j / rb);
            }
        }
        hungarian(&cost, l).0 / l as f64
    } else {
        let mut cost = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                cost[i * m + j] = cost_of(i, j);
            }
        }
        transport_min_cost_flow(&cost, &a.weights, &b.weights)
    };
    let total = total.max(0.0);
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

/// Evaluation points with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoints {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl EvalPoints {
    /// Cell centres of an `nx x ny` overlay grid, each weighted by its area.
    pub fn overlay(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("overlay grid needs at least one cell"));
        }
        let (hx, hy) = (domain.width() / nx as f64, domain.height() / ny as f64);
        let mut points = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                points.push([domain.x0 + (i as f64 + 0.5) * hx, domain.y0 + (j as f64 + 0.5) * hy]);
            }
        }
        Ok(EvalPoints {
            weights: vec![hx * hy; nx * ny],
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index pairs into an [`EvalPoints`] set, all with the same weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPoints {
    pub pairs: Vec<(usize, usize)>,
    pub weight: f64,
}

impl PairPoints {
    /// `count` pairs drawn uniformly with replacement; the weights integrate
    /// over `D x D`.
    pub fn sampled(points: &EvalPoints, count: usize, seed: u64) -> Result<Self> {
        if points.is_empty() || count == 0 {
            return Err(Error::invalid("pair sampling needs points and a positive count"));
        }
        let area: f64 = points.weights.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = points.len();
        let pairs = (0..count)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        Ok(PairPoints {
            pairs,
            weight: area * area / count as f64,
        })
    }
}

/// Member values at a point set: `values[point][member]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointValues {
    pub values: Vec<Vec<[f64; 2]>>,
}

/// Evaluates every member at every point. Points on shared faces take the
/// average over the adjacent elements.
pub fn sample_ensemble(ens: &Ensemble, points: &EvalPoints, exec: Exec) -> Result<PointValues> {
    let locator = PointLocator::new(ens.space.mesh().clone());
    let values = exec.try_map(points.len(), |k| {
        let x = points.points[k];
        let hits = locator.locate_all(x);
        if hits.is_empty() {
            return Err(Error::Geometry(format!("point ({}, {}) lies outside the mesh", x[0], x[1])));
        }
        let mut out = vec![[0.0; 2]; ens.len()];
        for &(e, xi) in &hits {
            let t = ens.space.tabulate(e, &[xi], None)?;
            for (o, f) in out.iter_mut().zip(ens.fields()) {
                let v = t.value(0, &ens.space.local_coeffs(&f.coeffs, e));
                o[0] += v[0];
                o[1] += v[1];
            }
        }
        let inv = 1.0 / hits.len() as f64;
        out.iter_mut().for_each(|o| {
            o[0] *= inv;
            o[1] *= inv;
        });
        Ok(out)
    })?;
    Ok(PointValues { values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinResult {
    pub w1: f64,
    pub w2: f64,
}

fn check_domains(a: &Ensemble, b: &Ensemble) -> Result<()> {
    let (ra, rb) = (a.space.mesh().bounding_box(), b.space.mesh().bounding_box());
    let tol = 1e-9 * (ra.width() + ra.height());
    let same = (ra.x0 - rb.x0).abs() <= tol
        && (ra.x1 - rb.x1).abs() <= tol
        && (ra.y0 - rb.y0).abs() <= tol
        && (ra.y1 - rb.y1).abs() <= tol;
    if same {
        Ok(())
    } else {
        Err(Error::contract("ensembles live on different domains"))
    }
}

/// `W1`: weighted sum over `eval` of the 1-Wasserstein distance between
/// the members' velocities at each point. `W2`: likewise over `pairs` with
/// atoms `(u(x), u(y))` in `R^4`.
pub fn wasserstein_distances(
    a: &Ensemble,
    b: &Ensemble,
    eval: &EvalPoints,
    pairs: &PairPoints,
    exec: Exec,
) -> Result<WassersteinResult> {
    if eval.is_empty() || pairs.pairs.is_empty() {
        return Err(Error::invalid("Wasserstein distances need nonempty point sets"));
    }
    if let Some(&(i, j)) = pairs.pairs.iter().find(|&&(i, j)| i >= eval.len() || j >= eval.len()) {
        return Err(Error::invalid(format!("pair ({i}, {j}) indexes past the evaluation points")));
    }
    check_domains(a, b)?;
    let va = sample_ensemble(a, eval, exec)?;
    let vb = sample_ensemble(b, eval, exec)?;
    let one_point = |vals: &PointValues, k: usize| -> Result<Atoms> {
        let pts: Vec<Vec<f64>> = vals.values[k].iter().map(|v| v.to_vec()).collect();
        Atoms::uniform(2, &pts)
    };
    let two_point = |vals: &PointValues, (i, j): (usize, usize)| -> Result<Atoms> {
        let pts: Vec<Vec<f64>> = vals.values[i]
            .iter()
            .zip(&vals.values[j])
            .map(|(x, y)| vec![x[0], x[1], y[0], y[1]])
            .collect();
        Atoms::uniform(4, &pts)
    };
    let d1 = exec.try_map(eval.len(), |k| emd(&one_point(&va, k)?, &one_point(&vb, k)?, 1.0))?;
    let d2 = exec.try_map(pairs.pairs.len(), |k| {
        let pair = pairs.pairs[k];
        emd(&two_point(&va, pair)?, &two_point(&vb, pair)?, 1.0)
    })?;
    let w1 = d1.iter().zip(&eval.weights).map(|(d, w)| d * w).sum();
    let w2 = d2.iter().sum::<f64>() * pairs.weight;
    Ok(WassersteinResult { w1, w2 })
}

//! Gauss rules on the unit interval, the unit square and the reference
//! triangle (collapsed-coordinate construction).

use crate::mesh::CellKind;

/// A quadrature rule on a reference domain: points and positive weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // Map from [-1, 1] to [0, 1].
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor Gauss rule with `n` points per direction on `[0,1]^2`.
pub fn square(n: usize) -> Rule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Rule { points, weights }
}

/// Collapsed Gauss rule on the triangle `(0,0), (1,0), (0,1)`; exact for
/// polynomials of total degree `2n - 2`.
pub fn triangle(n: usize) -> Rule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let eta = x[j];
            points.push([x[i] * (1.0 - eta), eta]);
            weights.push(w[i] * w[j] * (1.0 - eta));
        }
    }
    Rule { points, weights }
}

pub fn cell_rule(kind: CellKind, n: usize) -> Rule {
    match kind {
        CellKind::Triangle => triangle(n),
        CellKind::Quadrilateral => square(n),
    }
}

/// Points per direction for volume integrals of a degree-`k` velocity space.
pub fn volume_points(degree: usize) -> usize {
    degree + 3
}

/// Points on faces for a degree-`k` velocity space.
pub fn face_points(degree: usize) -> usize {
    degree + 3
}

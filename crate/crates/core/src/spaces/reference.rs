//! Raviart-Thomas shape functions on the reference triangle and square,
//! built as the dual basis of edge and interior moments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::CellKind;
use crate::quadrature::{self, gauss_legendre};

/// Reference vertices: triangle (0,0),(1,0),(0,1); square [0,1]^2.
pub fn reference_vertices(kind: CellKind) -> &'static [[f64; 2]] {
    match kind {
        CellKind::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        CellKind::Quadrilateral => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    }
}

/// Point on local edge `l` at parameter `s` in [0,1], running from vertex
/// `l` to vertex `l + 1`.
pub fn edge_point(kind: CellKind, l: usize, s: f64) -> [f64; 2] {
    let v = reference_vertices(kind);
    let a = v[l];
    let b = v[(l + 1) % v.len()];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Outward unit normal and length of reference edge `l`.
fn edge_normal(kind: CellKind, l: usize) -> ([f64; 2], f64) {
    let v = reference_vertices(kind);
    let a = v[l];
    let b = v[(l + 1) % v.len()];
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    ([(b[1] - a[1]) / len, -(b[0] - a[0]) / len], len)
}

/// Legendre polynomial of degree `j` on [0,1] (unnormalized: 1, 2s-1).
pub fn face_poly(j: usize, s: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0 * s - 1.0,
        _ => unreachable!("face degree above 1"),
    }
}

/// Test functions of the interior moments for k = 1: P_0^2 on triangles,
/// Q_{0,1} x Q_{1,0} on squares.
pub fn interior_tests(kind: CellKind, p: [f64; 2]) -> Vec<[f64; 2]> {
    match kind {
        CellKind::Triangle => vec![[1.0, 0.0], [0.0, 1.0]],
        CellKind::Quadrilateral => vec![[1.0, 0.0], [p[1], 0.0], [0.0, 1.0], [0.0, p[0]]],
    }
}

/// A vector monomial term: `coef * x^a * y^b` in component `comp`.
#[derive(Debug, Clone, Copy)]
struct Term {
    comp: usize,
    a: i32,
    b: i32,
    coef: f64,
}

fn t(comp: usize, a: i32, b: i32) -> Term {
    Term {
        comp,
        a,
        b,
        coef: 1.0,
    }
}

fn monomials(kind: CellKind, degree: usize) -> Vec<Vec<Term>> {
    match (kind, degree) {
        (CellKind::Triangle, 0) => vec![vec![t(0, 0, 0)], vec![t(1, 0, 0)], vec![t(0, 1, 0), t(1, 0, 1)]],
        (CellKind::Triangle, 1) => vec![
            vec![t(0, 0, 0)],
            vec![t(0, 1, 0)],
            vec![t(0, 0, 1)],
            vec![t(1, 0, 0)],
            vec![t(1, 1, 0)],
            vec![t(1, 0, 1)],
            vec![t(0, 2, 0), t(1, 1, 1)],
            vec![t(0, 1, 1), t(1, 0, 2)],
        ],
        (CellKind::Quadrilateral, 0) => vec![
            vec![t(0, 0, 0)],
            vec![t(0, 1, 0)],
            vec![t(1, 0, 0)],
            vec![t(1, 0, 1)],
        ],
        (CellKind::Quadrilateral, 1) => {
            let mut m = Vec::new();
            for a in 0..=2 {
                for b in 0..=1 {
                    m.push(vec![t(0, a, b)]);
                }
            }
            for a in 0..=1 {
                for b in 0..=2 {
                    m.push(vec![t(1, a, b)]);
                }
            }
            m
        }
        _ => unreachable!("degree checked by caller"),
    }
}

fn powi(x: f64, n: i32) -> f64 {
    if n <= 0 {
        1.0
    } else {
        x.powi(n)
    }
}

fn eval_terms(terms: &[Term], p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for tm in terms {
        let (x, y) = (p[0], p[1]);
        v[tm.comp] += tm.coef * powi(x, tm.a) * powi(y, tm.b);
        if tm.a > 0 {
            g[tm.comp][0] += tm.coef * tm.a as f64 * powi(x, tm.a - 1) * powi(y, tm.b);
        }
        if tm.b > 0 {
            g[tm.comp][1] += tm.coef * tm.b as f64 * powi(x, tm.a) * powi(y, tm.b - 1);
        }
    }
    (v, g)
}

/// Reference RT_k element: shape functions as combinations of monomials.
#[derive(Debug, Clone)]
pub struct RtReference {
    pub kind: CellKind,
    pub degree: usize,
    monomials: Vec<Vec<Term>>,
    /// `coeffs[(m, i)]`: weight of monomial `m` in shape function `i`.
    coeffs: DMatrix<f64>,
}

impl RtReference {
    pub fn new(kind: CellKind, degree: usize) -> Result<Self> {
        if degree > 1 {
            return Err(Error::invalid(format!(
                "velocity degree {degree} is not supported (use 0 or 1)"
            )));
        }
        let monomials = monomials(kind, degree);
        let n = monomials.len();
        let nv = kind.n_vertices();
        let mut dofs = DMatrix::<f64>::zeros(n, n);
        let (gx, gw) = gauss_legendre(degree + 3);
        for (m, terms) in monomials.iter().enumerate() {
            let mut row = 0;
            for l in 0..nv {
                let (normal, len) = edge_normal(kind, l);
                for j in 0..=degree {
                    let mut s = 0.0;
                    for (&x, &w) in gx.iter().zip(&gw) {
                        let (v, _) = eval_terms(terms, edge_point(kind, l, x));
                        s += w * len * (v[0] * normal[0] + v[1] * normal[1]) * face_poly(j, x);
                    }
                    dofs[(row, m)] = s;
                    row += 1;
                }
            }
            if degree == 1 {
                let rule = quadrature::cell_rule(kind, 4);
                for a in 0..interior_tests(kind, [0.0, 0.0]).len() {
                    dofs[(row, m)] = rule.integrate(|p| {
                        let (v, _) = eval_terms(terms, p);
                        let w = interior_tests(kind, p)[a];
                        v[0] * w[0] + v[1] * w[1]
                    });
                    row += 1;
                }
            }
            debug_assert_eq!(row, n);
        }
        let coeffs = dofs
            .try_inverse()
            .ok_or_else(|| Error::Assembly("singular reference DOF matrix".into()))?;
        Ok(RtReference {
            kind,
            degree,
            monomials,
            coeffs,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.monomials.len()
    }

    /// Number of moments per edge.
    pub fn dofs_per_edge(&self) -> usize {
        self.degree + 1
    }

    pub fn n_interior(&self) -> usize {
        self.n_basis() - self.kind.n_vertices() * self.dofs_per_edge()
    }

    /// Values, gradients and divergences of all shape functions at `p`.
    pub fn eval(&self, p: [f64; 2], values: &mut [[f64; 2]], grads: &mut [[[f64; 2]; 2]], divs: &mut [f64]) {
        let n = self.n_basis();
        for i in 0..n {
            values[i] = [0.0; 2];
            grads[i] = [[0.0; 2]; 2];
        }
        for (m, terms) in self.monomials.iter().enumerate() {
            let (v, g) = eval_terms(terms, p);
            for i in 0..n {
                let c = self.coeffs[(m, i)];
                if c == 0.0 {
                    continue;
                }
                for a in 0..2 {
                    values[i][a] += c * v[a];
                    for b in 0..2 {
                        grads[i][a][b] += c * g[a][b];
                    }
                }
            }
        }
        for i in 0..n {
            divs[i] = grads[i][0][0] + grads[i][1][1];
        }
    }

    pub fn values_at(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let n = self.n_basis();
        let mut v = vec![[0.0; 2]; n];
        let mut g = vec![[[0.0; 2]; 2]; n];
        let mut d = vec![0.0; n];
        self.eval(p, &mut v, &mut g, &mut d);
        v
    }
}

/// Discontinuous scalar shape functions: P_k on triangles, Q_k on squares.
#[derive(Debug, Clone)]
pub struct ScalarReference {
    pub kind: CellKind,
    pub degree: usize,
    exps: Vec<(i32, i32)>,
}

impl ScalarReference {
    pub fn new(kind: CellKind, degree: usize) -> Result<Self> {
        let exps = match (kind, degree) {
            (_, 0) => vec![(0, 0)],
            (CellKind::Triangle, 1) => vec![(0, 0), (1, 0), (0, 1)],
            (CellKind::Quadrilateral, 1) => vec![(0, 0), (1, 0), (0, 1), (1, 1)],
            _ => {
                return Err(Error::invalid(format!(
                    "pressure degree {degree} is not supported (use 0 or 1)"
                )))
            }
        };
        Ok(ScalarReference { kind, degree, exps })
    }

    pub fn n_basis(&self) -> usize {
        self.exps.len()
    }

    pub fn eval(&self, p: [f64; 2], out: &mut [f64]) {
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = powi(p[0], a) * powi(p[1], b);
        }
    }

    /// Local coefficients of the constant function 1 (first basis function).
    pub fn constant_coeffs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_basis()];
        c[0] = 1.0;
        c
    }
}

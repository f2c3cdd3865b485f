//! Krylov solvers (preconditioned conjugate gradients, restarted GMRES with
//! right preconditioning) and a sparse LU wrapper.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm, Csr};
use crate::spaces::VelocitySpace;

/// A linear map `y = A x` on vectors of length `dim`.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl Operator for Csr {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

/// Identity, for unpreconditioned runs.
pub struct IdentityOp(pub usize);

impl Operator for IdentityOp {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-10,
            restart: 50,
            max_iter: 5000,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("GMRES tolerance {} must lie in (0, 1)", self.tol)));
        }
        if self.restart == 0 || self.max_iter == 0 {
            return Err(Error::invalid("GMRES restart and max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct GmresStats {
    pub iterations: usize,
    /// Final true relative residual `|b - A x| / |b|`.
    pub residual: f64,
    /// Relative residual estimate after each inner iteration.
    pub history: Vec<f64>,
}

fn true_residual(a: &dyn Operator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Restarted GMRES(m) for `A x = b` with right preconditioner `P ~ A^{-1}`,
/// modified Gram-Schmidt and Givens rotations. `x` holds the initial guess.
pub fn gmres(a: &dyn Operator, precond: &dyn Operator, b: &[f64], x: &mut [f64], cfg: &GmresConfig) -> Result<GmresStats> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n || x.len() != n || precond.dim() != n {
        return Err(Error::contract("GMRES dimension mismatch"));
    }
    let mut stats = GmresStats::default();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(stats);
    }
    let m = cfg.restart.min(n.max(1));
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    let mut rnorm = true_residual(a, b, x, &mut r);
    stats.residual = rnorm / bnorm;
    while stats.residual > cfg.tol {
        if stats.iterations >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / rnorm).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = rnorm;
        let mut k = 0;
        while k < m && stats.iterations < cfg.max_iter {
            precond.apply(&basis[k], &mut z);
            a.apply(&z, &mut w);
            for i in 0..=k {
                let hik = dot(&w, &basis[i]);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&basis[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            stats.iterations += 1;
            k += 1;
            let est = g[k].abs() / bnorm;
            stats.history.push(est);
            if est <= cfg.tol || hn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution and update x += P (V y).
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut vy = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (o, v) in vy.iter_mut().zip(&basis[j]) {
                *o += yj * v;
            }
        }
        precond.apply(&vy, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        rnorm = true_residual(a, b, x, &mut r);
        stats.residual = rnorm / bnorm;
        if !stats.residual.is_finite() {
            return Err(Error::NonConvergence {
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
    }
    Ok(stats)
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`. Returns the
/// iteration count.
pub fn cg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.nrows;
    let diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if norm(&r) <= tol * bnorm {
            return Ok(it);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Assembly("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm(&r) <= tol * bnorm {
        return Ok(max_iter);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
    })
}

/// Symbolic LU analysis of a fixed sparsity pattern, reused across
/// numeric factorizations.
#[derive(Debug, Clone)]
pub struct LuPattern {
    symbolic: SymbolicLu<usize>,
    n: usize,
    nnz: usize,
}

/// Numeric sparse LU factors of a square matrix.
#[derive(Debug)]
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

// CSR arrays of A read as CSC describe A^T, so the factors are those of A^T
// and A x = b is solved with the transposed solve.
fn csc_of_transpose(a: &Csr) -> SymbolicSparseColMatRef<'_, usize> {
    SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.indptr, None, &a.indices)
}

impl LuPattern {
    pub fn new(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Setup(format!("LU of a non-square {}x{} matrix", a.nrows, a.ncols)));
        }
        let symbolic = SymbolicLu::try_new(csc_of_transpose(a))
            .map_err(|e| Error::Setup(format!("symbolic LU failed: {e:?}")))?;
        Ok(LuPattern {
            symbolic,
            n: a.nrows,
            nnz: a.nnz(),
        })
    }

    /// Numeric factorization of `a`, which must have the analysed pattern.
    pub fn factor(&self, a: &Csr) -> Result<SparseLu> {
        if a.nrows != self.n || a.nnz() != self.nnz {
            return Err(Error::contract("matrix pattern differs from the analysed one"));
        }
        let mat = SparseColMatRef::new(csc_of_transpose(a), &a.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| Error::Setup(format!("LU factorization failed: {e:?}")))?;
        Ok(SparseLu { lu, n: self.n })
    }
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        LuPattern::new(a)?.factor(a)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu.solve_transpose_in_place(rhs);
    }
}

impl Operator for SparseLu {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Incomplete LU factors with the sparsity of the input matrix: unit lower
/// triangle and upper triangle stored together.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    factors: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    /// Requires sorted column indices and a structurally present diagonal.
    pub fn new(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Setup(format!("ILU of a non-square {}x{} matrix", a.nrows, a.ncols)));
        }
        let n = a.nrows;
        let mut f = a.clone();
        let mut diag = Vec::with_capacity(n);
        for r in 0..n {
            let d = f
                .position(r, r)
                .ok_or_else(|| Error::Setup(format!("ILU: row {r} has no diagonal entry")))?;
            diag.push(d);
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (f.indptr[i], f.indptr[i + 1]);
            for p in start..end {
                marker[f.indices[p]] = p;
            }
            for p in start..diag[i] {
                let k = f.indices[p];
                let pivot = f.values[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Setup(format!("ILU: zero pivot in row {k}")));
                }
                let lik = f.values[p] / pivot;
                f.values[p] = lik;
                for q in diag[k] + 1..f.indptr[k + 1] {
                    let m = marker[f.indices[q]];
                    if m != usize::MAX {
                        f.values[m] -= lik * f.values[q];
                    }
                }
            }
            for p in start..end {
                marker[f.indices[p]] = usize::MAX;
            }
            if f.values[diag[i]] == 0.0 {
                return Err(Error::Setup(format!("ILU: zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { factors: f, diag })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let f = &self.factors;
        for i in 0..f.nrows {
            let mut s = x[i];
            for p in f.indptr[i]..self.diag[i] {
                s -= f.values[p] * x[f.indices[p]];
            }
            x[i] = s;
        }
        for i in (0..f.nrows).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..f.indptr[i + 1] {
                s -= f.values[p] * x[f.indices[p]];
            }
            x[i] = s / f.values[self.diag[i]];
        }
    }
}

impl Operator for Ilu0 {
    fn dim(&self) -> usize {
        self.factors.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Solves `A x = rhs` on the free DOFs of `space` with the essential values
/// `fixed` (full-length vector; only Dirichlet entries are read).
pub fn solve_constrained_spd(a: &Csr, rhs: &[f64], fixed: &[f64], space: &VelocitySpace) -> Result<Vec<f64>> {
    let free = space.free_dofs();
    let dir = space.dirichlet_dofs();
    let a_ff = a.submatrix(free, free);
    let a_fd = a.submatrix(free, dir);
    let ud: Vec<f64> = dir.iter().map(|&d| fixed[d]).collect();
    let mut b: Vec<f64> = free.iter().map(|&d| rhs[d]).collect();
    a_fd.matvec_add(-1.0, &ud, &mut b);
    let mut xf = vec![0.0; free.len()];
    cg(&a_ff, &b, &mut xf, 1e-14, 20 * free.len().max(10))?;
    let mut x = vec![0.0; a.nrows];
    for (&d, v) in free.iter().zip(&xf) {
        x[d] = *v;
    }
    for (&d, v) in dir.iter().zip(&ud) {
        x[d] = *v;
    }
    Ok(x)
}

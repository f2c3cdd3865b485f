//! Coordinate and compressed-row sparse matrices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Debug, Clone, Default)]
pub struct Coo {
    pub nrows: usize,
    pub ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Coo {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Coo {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols, "({r}, {c}) out of range");
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Stable sort by (row, col), then sum duplicates in insertion order.
    pub fn to_csr(&self) -> Csr {
        let mut order: Vec<usize> = (0..self.vals.len()).collect();
        order.sort_by_key(|&i| (self.rows[i], self.cols[i]));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let key = (self.rows[i], self.cols[i]);
            if last == Some(key) {
                *values.last_mut().unwrap() += self.vals[i];
            } else {
                indices.push(key.1);
                values.push(self.vals[i]);
                indptr[key.0 + 1] += 1;
                last = Some(key);
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut coo = Coo::new(n, n);
        for i in 0..n {
            coo.push(i, i, 1.0);
        }
        coo.to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    /// Same shape and sparsity structure.
    pub fn same_pattern(&self, other: &Csr) -> bool {
        self.shape() == other.shape() && self.indptr == other.indptr && self.indices == other.indices
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Position of entry (r, c) in `values`, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| self.indptr[r] + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *out = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `y += alpha A x`.
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *out += alpha * s;
        }
    }

    /// `y += alpha A^T x`.
    pub fn matvec_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += alpha * self.values[k] * xr;
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                indices[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                d[(r, self.indices[k])] += self.values[k];
            }
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Csr {
        let mut coo = Coo::new(d.nrows(), d.ncols());
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                if d[(r, c)] != 0.0 {
                    coo.push(r, c, d[(r, c)]);
                }
            }
        }
        coo.to_csr()
    }

    /// Largest absolute entry of `self - other`, over the union of patterns.
    pub fn max_abs_diff(&self, other: &Csr) -> f64 {
        assert_eq!(self.shape(), other.shape());
        let mut m: f64 = 0.0;
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let d = if j >= cb.len() || (i < ca.len() && ca[i] < cb[j]) {
                    i += 1;
                    va[i - 1]
                } else if i >= ca.len() || cb[j] < ca[i] {
                    j += 1;
                    -vb[j - 1]
                } else {
                    i += 1;
                    j += 1;
                    va[i - 1] - vb[j - 1]
                };
                m = m.max(d.abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows `rows` and columns `cols` (given as old indices, in new order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut coo = Coo::new(rows.len(), cols.len());
        for (nr, &r) in rows.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = col_map[self.indices[k]];
                if c != usize::MAX {
                    coo.push(nr, c, self.values[k]);
                }
            }
        }
        coo.to_csr()
    }

    /// `self * diag(d) * self^T`.
    pub fn gram(&self, d: &[f64]) -> Csr {
        let t = self.transpose();
        let n = self.nrows;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut cols = Vec::new();
        for i in 0..n {
            cols.clear();
            for k in self.indptr[i]..self.indptr[i + 1] {
                let c = self.indices[k];
                let a = self.values[k] * d[c];
                for m in t.indptr[c]..t.indptr[c + 1] {
                    let j = t.indices[m];
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * t.values[m];
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            values,
        }
    }

    /// `alpha * self + beta * other` for matrices with identical patterns.
    pub fn linear_combination(&self, alpha: f64, other: &Csr, beta: f64) -> Result<Csr> {
        if !self.same_pattern(other) {
            return Err(Error::contract("linear combination of matrices with different patterns"));
        }
        let mut out = self.clone();
        for (o, &b) in out.values.iter_mut().zip(&other.values) {
            *o = alpha * *o + beta * b;
        }
        Ok(out)
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let _ = writeln!(s, "{} {} {:e}", r + 1, self.indices[k] + 1, self.values[k]);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_matrix_market()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Csr> {
        let perr = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| perr(1, "missing size line"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| perr(ln + 1, "invalid size line")))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(perr(ln + 1, "size line needs rows, cols and entries"));
        }
        let mut coo = Coo::new(dims[0], dims[1]);
        for (ln, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(perr(ln + 1, "expected `row col value`"));
            }
            let r: usize = t[0].parse().map_err(|_| perr(ln + 1, "invalid row"))?;
            let c: usize = t[1].parse().map_err(|_| perr(ln + 1, "invalid column"))?;
            let v: f64 = t[2].parse().map_err(|_| perr(ln + 1, "invalid value"))?;
            if r == 0 || c == 0 || r > dims[0] || c > dims[1] {
                return Err(perr(ln + 1, "index out of range"));
            }
            coo.push(r - 1, c - 1, v);
        }
        if coo.len() != dims[2] {
            return Err(perr(ln + 1, "entry count does not match header"));
        }
        Ok(coo.to_csr())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

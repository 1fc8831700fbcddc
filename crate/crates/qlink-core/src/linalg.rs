//! Dense complex helpers on top of nalgebra, plus a row-sparse form used by
//! the master-equation right-hand side.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a complex matrix from row-major `(re, im)` pairs.
pub fn cmat(rows: usize, cols: usize, entries: &[(f64, f64)]) -> CMat {
    assert_eq!(entries.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| {
        let (re, im) = entries[i * cols + j];
        c(re, im)
    })
}

pub fn real_mat(rows: usize, cols: usize, entries: &[f64]) -> CMat {
    assert_eq!(entries.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| c(entries[i * cols + j], 0.0))
}

/// Largest elementwise |m − m†|.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Exactly decoupled blocks are solved separately. Density matrices here are
/// block-diagonal with many empty rows, and the dense solver can return NaN
/// on those depending on which float backend num-traits was built with.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let n = h.nrows();
    let mut pairs: Vec<(f64, CVec)> = Vec::with_capacity(n);
    for block in coupled_blocks(&h) {
        let k = block.len();
        if k == 1 {
            let i = block[0];
            let mut v = CVec::zeros(n);
            v[i] = ONE;
            pairs.push((h[(i, i)].re, v));
            continue;
        }
        let sub = CMat::from_fn(k, k, |a, b| h[(block[a], block[b])]);
        let eig = nalgebra::SymmetricEigen::new(sub);
        for col in 0..k {
            let mut v = CVec::zeros(n);
            for (a, &i) in block.iter().enumerate() {
                v[i] = eig.eigenvectors[(a, col)];
            }
            pairs.push((eig.eigenvalues[col], v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = CMat::from_fn(n, n, |i, j| pairs[j].1[i]);
    (values, vectors)
}

/// Index sets of the connected components of the nonzero pattern, each
/// ascending, ordered by smallest index.
fn coupled_blocks(h: &CMat) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut block_of = alloc::vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if block_of[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        block_of[start] = id;
        let mut members = alloc::vec![start];
        let mut next = 0;
        while next < members.len() {
            let i = members[next];
            next += 1;
            for j in 0..n {
                if block_of[j] == usize::MAX && h[(i, j)] != ZERO {
                    block_of[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        blocks.push(members);
    }
    blocks
}

/// Rebuilds V·diag(f(λ))·V† from a Hermitian eigendecomposition.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigh(m).0.first().copied().unwrap_or(0.0)
}

/// Row-compressed complex matrix. Only the structure needed by the
/// integrator: products with dense row-major square matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSparse {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl RowSparse {
    pub fn from_dense(m: &CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self { n, row_start, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Diagonal entries when the matrix is diagonal, `None` otherwise.
    pub fn as_diagonal(&self) -> Option<Vec<f64>> {
        let mut d = alloc::vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j != i || v.im != 0.0 {
                    return None;
                }
                d[i] = v.re;
            }
        }
        Some(d)
    }

    /// `out += scale · A · X` for a dense row-major `n × n` matrix X.
    pub fn mul_dense_acc(&self, x: &[C64], scale: C64, out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, a) in self.row(i) {
                let f = a * scale;
                let xrow = &x[k * n..(k + 1) * n];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += f * xv;
                }
            }
        }
    }

    /// `out += scale · Y · A†` for a dense row-major `n × n` matrix Y.
    pub fn dense_mul_adjoint_acc(&self, y: &[C64], scale: C64, out: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            for (l, a) in self.row(j) {
                let f = a.conj() * scale;
                for i in 0..n {
                    out[i * n + j] += y[i * n + l] * f;
                }
            }
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Row-major flattening of a square matrix.
pub fn to_row_major(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn from_row_major(n: usize, data: &[C64]) -> CMat {
    CMat::from_fn(n, n, |i, j| data[i * n + j])
}

/// Solves the real square system `a · x = b` (row-major `a`).
pub fn solve_real(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

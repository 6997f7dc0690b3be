//! Dense real matrices and vectors, plus the Kronecker identities used by
//! every other module.
//!
//! [`Matrix`] stores its entries in **row-major** order: entry `(i, j)` lives
//! at `data[i * cols + j]`. Vectorization follows the column-stacking
//! convention, so block `i` of [`Matrix::vec`] is column `i` of the matrix.
//! For a signal partitioned into `N1` blocks of length `N2` this means
//! `x = vec(X)` with `X` of shape `N2 x N1`, and
//!
//! ```text
//! (H1 ⊗ H2) x = vec(H2 X H1ᵀ)
//! ```
//!
//! which is what [`kron_matvec`] evaluates.

use std::fmt::Write as _;
use std::ops::{Deref, DerefMut, Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Dense column vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

/// Partition of a length `n_blocks * block_len` vector into contiguous blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct BlockLayout {
    pub n_blocks: usize,
    pub block_len: usize,
}

impl BlockLayout {
    pub fn new(n_blocks: usize, block_len: usize) -> Result<Self> {
        if n_blocks == 0 || block_len == 0 {
            return Err(Error::InvalidParameter(format!(
                "block layout {n_blocks}x{block_len} must have positive extents"
            )));
        }
        Ok(Self { n_blocks, block_len })
    }

    /// Length of the vectors this layout partitions.
    pub fn len(&self) -> usize {
        self.n_blocks * self.block_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block index of a flat position.
    #[inline]
    pub fn block_of(&self, index: usize) -> usize {
        index / self.block_len
    }

    /// Offset of a flat position inside its block.
    #[inline]
    pub fn offset_of(&self, index: usize) -> usize {
        index % self.block_len
    }

    #[inline]
    pub fn flat(&self, block: usize, offset: usize) -> usize {
        block * self.block_len + offset
    }
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(dim_err(format!("matrix shape {rows}x{cols} must be positive")));
        }
        if data.len() != rows * cols {
            return Err(dim_err(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim_err("rows of unequal length"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// All-zero matrix. Zero extents are allowed for intermediate values.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vector {
        Vector::from((0..self.rows).map(|i| self[(i, j)]).collect::<Vec<_>>())
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Column submatrix, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (d, &c) in dst.iter_mut().zip(cols) {
                *d = src[c];
            }
        }
        out
    }

    /// Row submatrix, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (k, &r) in rows.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(dim_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, self, false, other, false, 0.0, &mut out);
        Ok(out)
    }

    /// `selfᵀ · other`, without forming the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(dim_err(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(1.0, self, true, other, false, 0.0, &mut out);
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(dim_err(format!(
                "cannot multiply {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(1.0, self, false, other, true, 0.0, &mut out);
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if self.cols != x.len() {
            return Err(dim_err(format!(
                "cannot apply {}x{} matrix to length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(Vector::from(
            (0..self.rows).map(|i| dot(self.row(i), x)).collect::<Vec<_>>(),
        ))
    }

    /// `selfᵀ · y`.
    pub fn t_matvec(&self, y: &[f64]) -> Result<Vector> {
        if self.rows != y.len() {
            return Err(dim_err(format!(
                "cannot apply transpose of {}x{} matrix to length-{} vector",
                self.rows,
                self.cols,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), &mut out);
            }
        }
        Ok(Vector::from(out))
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.cols);
        gemm(1.0, self, true, self, false, 0.0, &mut out);
        symmetrize(&mut out);
        out
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        max_abs_diff(&self.data, &other.data)
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> Vector {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self[(i, j)]);
            }
        }
        Vector::from(out)
    }

    /// Inverse of [`Matrix::vec`]: column `j` of the result is block `j` of `x`.
    pub fn unvec(x: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
        if rows == 0 || cols == 0 || x.len() != rows * cols {
            return Err(dim_err(format!(
                "cannot reshape length-{} vector into {rows}x{cols}",
                x.len()
            )));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| x[j * rows + i]))
    }

    /// Plain numeric CSV, one line per row, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV written by [`Matrix::to_csv`]. Blank lines are ignored.
    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| {
                        Error::InvalidParameter(format!(
                            "line {}: cannot parse {field:?} as a number: {e}",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Single-column matrix view of the vector (copies).
    pub fn to_column(&self) -> Matrix {
        Matrix { rows: self.data.len(), cols: 1, data: self.data.clone() }
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let cols = ac * bc;
    let mut out = Matrix::zeros(ar * br, cols);
    for i1 in 0..ar {
        for i2 in 0..br {
            let dst = out.row_mut(i1 * br + i2);
            let brow = b.row(i2);
            for (j1, &av) in a.row(i1).iter().enumerate() {
                for (d, &bv) in dst[j1 * bc..(j1 + 1) * bc].iter_mut().zip(brow) {
                    *d = av * bv;
                }
            }
        }
    }
    out
}

/// `(h1 ⊗ h2) · x` evaluated as `vec(h2 · unvec(x) · h1ᵀ)`.
pub fn kron_matvec(h1: &Matrix, h2: &Matrix, x: &[f64]) -> Result<Vector> {
    if x.len() != h1.cols() * h2.cols() {
        return Err(dim_err(format!(
            "length-{} vector does not match a Kronecker dictionary with {}x{} column blocks",
            x.len(),
            h1.cols(),
            h2.cols()
        )));
    }
    let x_mat = Matrix::unvec(x, h2.cols(), h1.cols())?;
    let y_mat = h2.matmul(&x_mat)?.matmul_t(h1)?;
    Ok(y_mat.vec())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `c = alpha · op(a) · op(b) + beta · c` where `op` optionally transposes.
pub(crate) fn gemm(
    alpha: f64,
    a: &Matrix,
    trans_a: bool,
    b: &Matrix,
    trans_b: bool,
    beta: f64,
    c: &mut Matrix,
) {
    let (m, k, rsa, csa) = if trans_a {
        (a.cols, a.rows, 1, a.cols as isize)
    } else {
        (a.rows, a.cols, a.cols as isize, 1)
    };
    let (kb, n, rsb, csb) = if trans_b {
        (b.cols, b.rows, 1, b.cols as isize)
    } else {
        (b.rows, b.cols, b.cols as isize, 1)
    };
    assert_eq!(k, kb, "inner dimensions disagree");
    assert_eq!((c.rows, c.cols), (m, n), "output shape disagrees");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.scale(beta);
        return;
    }
    // SAFETY: strides describe the row-major buffers of `a`, `b` and `c`,
    // whose extents were checked against (m, k, n) above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub(crate) fn symmetrize(m: &mut Matrix) {
    let n = m.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `a`; returns `None` when a pivot falls below
    /// `rel_tol · max(diag(a))`, i.e. the matrix is not numerically SPD.
    pub fn new(a: &Matrix, rel_tol: f64) -> Option<Cholesky> {
        let n = a.rows;
        debug_assert_eq!(n, a.cols);
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let floor = rel_tol * max_diag;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    if !(s > floor) || !s.is_finite() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// Solves `L W = B` in place (B is n x k).
    pub fn forward_in_place(&self, b: &mut Matrix) {
        let n = self.dim();
        let k = b.cols;
        for i in 0..n {
            let (done, rest) = b.data.split_at_mut(i * k);
            let row_i = &mut rest[..k];
            for j in 0..i {
                let lij = self.l[(i, j)];
                if lij != 0.0 {
                    axpy(-lij, &done[j * k..(j + 1) * k], row_i);
                }
            }
            let d = 1.0 / self.l[(i, i)];
            row_i.iter_mut().for_each(|v| *v *= d);
        }
    }

    /// Solves `Lᵀ W = B` in place.
    pub fn backward_in_place(&self, b: &mut Matrix) {
        let n = self.dim();
        let k = b.cols;
        for i in (0..n).rev() {
            let (head, tail) = b.data.split_at_mut((i + 1) * k);
            let row_i = &mut head[i * k..];
            for j in (i + 1)..n {
                let lji = self.l[(j, i)];
                if lji != 0.0 {
                    axpy(-lji, &tail[(j - i - 1) * k..(j - i) * k], row_i);
                }
            }
            let d = 1.0 / self.l[(i, i)];
            row_i.iter_mut().for_each(|v| *v *= d);
        }
    }

    /// Solves `A X = B` in place.
    pub fn solve_in_place(&self, b: &mut Matrix) {
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = Matrix::identity(self.dim());
        self.solve_in_place(&mut inv);
        symmetrize(&mut inv);
        inv
    }
}

/// Least-squares solution of `a · X ≈ b`.
///
/// Uses the normal equations when `aᵀa` is numerically positive definite.
/// Otherwise (rank-deficient or badly conditioned `a`) falls back to the SVD
/// pseudo-inverse, which returns the minimum-norm least-squares solution with
/// singular values below `max(rows, cols) · eps · σ_max` treated as zero.
pub fn lstsq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(dim_err(format!(
            "least squares with {}x{} system and {} right-hand-side rows",
            a.rows, a.cols, b.rows
        )));
    }
    if a.cols == 0 {
        return Ok(Matrix::zeros(0, b.cols));
    }
    if a.cols <= a.rows {
        if let Some(chol) = Cholesky::new(&a.gram(), 1e-10) {
            let mut rhs = a.t_matmul(b)?;
            chol.solve_in_place(&mut rhs);
            return Ok(rhs);
        }
    }
    let svd = a.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * (a.rows.max(a.cols) as f64) * f64::EPSILON;
    let sol = svd
        .solve(&b.to_nalgebra(), eps)
        .map_err(|e| Error::InvalidParameter(format!("pseudo-inverse failed: {e}")))?;
    Ok(Matrix::from_nalgebra(&sol))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows;
    match n {
        0 => Vec::new(),
        1 => vec![a[(0, 0)]],
        2 => {
            let (p, q, r) = (a[(0, 0)], a[(0, 1)], a[(1, 1)]);
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let mut ev: Vec<f64> = a.to_nalgebra().symmetric_eigenvalues().iter().cloned().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    }
}

/// Squared spectral norm `‖a‖₂²`.
pub fn spectral_norm_sq(a: &Matrix) -> f64 {
    let g = if a.rows < a.cols { a.matmul_t(a).expect("conformable") } else { a.gram() };
    symmetric_eigenvalues(&g).last().copied().unwrap_or(0.0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Definition-based oracle.
    fn kron_naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
        for i1 in 0..a.rows() {
            for j1 in 0..a.cols() {
                for i2 in 0..b.rows() {
                    for j2 in 0..b.cols() {
                        out[(i1 * b.rows() + i2, j1 * b.cols() + j2)] = a[(i1, j1)] * b[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kron_of_identities_is_identity() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(2)), Matrix::identity(4));
    }

    #[test]
    fn kron_row_by_column() {
        let a = m(&[&[1.0, 2.0]]);
        let b = m(&[&[3.0], &[4.0]]);
        let expected = m(&[&[3.0, 6.0], &[4.0, 8.0]]);
        assert_eq!(kron_naive(&a, &b), expected);
        assert_eq!(kron(&a, &b), expected);
    }

    #[test]
    fn kron_full_dims() {
        let a = Matrix::from_fn(30, 40, |i, j| (i + j) as f64);
        let b = Matrix::from_fn(30, 40, |i, j| (i * j) as f64);
        assert_eq!(kron(&a, &b).shape(), (900, 1600));
    }

    #[test]
    fn vec_stacks_columns() {
        let x = m(&[&[1.0, 3.0], &[2.0, 4.0]]);
        assert_eq!(x.vec().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(Matrix::unvec(&[1.0, 2.0, 3.0, 4.0], 2, 2).unwrap(), x);
        assert_eq!(Matrix::zeros(40, 40).vec().len(), 1600);
        assert_eq!(Matrix::unvec(&[0.0; 900], 30, 30).unwrap().shape(), (30, 30));
    }

    #[test]
    fn unvec_rejects_bad_length() {
        assert!(matches!(Matrix::unvec(&[1.0; 5], 2, 2), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn matrix_new_validates() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn kron_matvec_identity_and_dims() {
        let x: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let y = kron_matvec(&Matrix::identity(3), &Matrix::identity(4), &x).unwrap();
        assert_eq!(y.as_slice(), x.as_slice());
        let h = Matrix::from_fn(30, 40, |i, j| ((i * 7 + j * 3) % 5) as f64);
        assert_eq!(kron_matvec(&h, &h, &vec![1.0; 1600]).unwrap().len(), 900);
        assert!(kron_matvec(&h, &h, &[1.0; 10]).is_err());
    }

    #[test]
    fn gemm_transposes() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), m(&[&[4.0, 5.0], &[10.0, 11.0]]));
        assert_eq!(a.t_matmul(&a).unwrap(), a.transpose().matmul(&a).unwrap());
        assert_eq!(a.matmul_t(&a).unwrap(), a.matmul(&a.transpose()).unwrap());
        assert_eq!(a.gram(), a.transpose().matmul(&a).unwrap());
        assert_eq!(a.t_matvec(&[1.0, 1.0]).unwrap().as_slice(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn cholesky_solves_and_rejects_singular() {
        let a = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let chol = Cholesky::new(&a, 1e-12).unwrap();
        let mut b = m(&[&[2.0], &[1.0]]);
        chol.solve_in_place(&mut b);
        assert_abs_diff_eq!(b[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b[(1, 0)], 0.0, epsilon = 1e-14);
        let inv = chol.inverse();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(2)) < 1e-14);
        assert!(Cholesky::new(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), 1e-12).is_none());
    }

    #[test]
    fn lstsq_rank_deficient_returns_min_norm() {
        // Two identical columns: the minimum-norm solution splits the weight evenly.
        let a = m(&[&[1.0, 1.0], &[0.0, 0.0]]);
        let b = m(&[&[2.0], &[0.0]]);
        let x = lstsq(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_small_cases() {
        let ev = symmetric_eigenvalues(&m(&[&[2.0, 1.0], &[1.0, 2.0]]));
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 3.0, epsilon = 1e-14);
        let ev = symmetric_eigenvalues(&m(&[&[2.0, 0.0, 0.0], &[0.0, 5.0, 0.0], &[0.0, 0.0, -1.0]]));
        assert_eq!(ev.len(), 3);
        assert_abs_diff_eq!(ev[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[2], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let a = m(&[&[1.5, -2.0], &[1e-300, 3.25]]);
        assert_eq!(Matrix::from_csv(&a.to_csv()).unwrap(), a);
        assert!(Matrix::from_csv("1,2\n3\n").is_err());
        assert!(Matrix::from_csv("1,x\n").is_err());
    }
}

//! Dense kernels: the column-major matrix type, thin QR, singular values,
//! norms and coherence.
//!
//! Factorizations and products run on `faer` views of our own storage; no
//! copies are made to hand a matrix to the kernels.

use std::ops::{Deref, Range};

use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par};
use serde::Serialize;

use crate::error::{dim_err, Error, Result};

/// Tall inputs (rows ≥ this ratio × cols) are reduced to their R factor
/// before the singular value solver runs.
const QR_PRECONDITION_RATIO: f64 = 1.5;

/// Orthonormality tolerance accepted by [`coherence`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Real dense matrix in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps column-major `data`, rejecting wrong lengths and non-finite
    /// entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k % rows.max(1),
                col: k / rows.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        let mut out = Vec::with_capacity(data.len());
        for j in 0..cols {
            out.extend((0..rows).map(|i| data[i * cols + j]));
        }
        Self::from_col_major(rows, cols, out)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return dim_err(format!("row {i} has {} entries, expected {n}", r.len()));
            }
            flat.extend_from_slice(r);
        }
        Self::from_row_major(m, n, &flat)
    }

    /// # Panics
    /// If `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    /// `rows × cols` matrix with `diag` on its main diagonal.
    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return dim_err(format!(
                "diagonal of length {} does not fit a {rows}x{cols} matrix",
                diag.len()
            ));
        }
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFinite { row: i, col: i });
            }
            m.data[i * rows + i] = d;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        self.data[j * self.rows + i]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.data[j * self.rows + i])
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = (self.rows, self.cols);
        let mut out = vec![0.0; m * n];
        // blocked to keep both sides cache resident
        const B: usize = 64;
        for jb in (0..n).step_by(B) {
            for ib in (0..m).step_by(B) {
                for j in jb..(jb + B).min(n) {
                    for i in ib..(ib + B).min(m) {
                        out[i * n + j] = self.data[j * m + i];
                    }
                }
            }
        }
        Self {
            rows: n,
            cols: m,
            data: out,
        }
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols, "column range out of bounds");
        Self {
            rows: self.rows,
            cols: range.len(),
            data: self.data[range.start * self.rows..range.end * self.rows].to_vec(),
        }
    }

    /// Rows `range` as a new matrix.
    pub fn row_block(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows, "row range out of bounds");
        let mut data = Vec::with_capacity(range.len() * self.cols);
        for j in 0..self.cols {
            data.extend_from_slice(&self.col(j)[range.clone()]);
        }
        Self {
            rows: range.len(),
            cols: self.cols,
            data,
        }
    }

    /// Appends the columns of `other` on the right.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return dim_err(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows, other.rows
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    /// Stacks the rows of `other` below.
    pub fn vcat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return dim_err(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            ));
        }
        let rows = self.rows + other.rows;
        let mut data = Vec::with_capacity(rows * self.cols);
        for j in 0..self.cols {
            data.extend_from_slice(self.col(j));
            data.extend_from_slice(other.col(j));
        }
        Ok(Self {
            rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub(crate) fn scale_in_place(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return dim_err(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return dim_err(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        matmul(
            out.view_mut(),
            Accum::Replace,
            self.view(),
            other.view(),
            1.0,
            Par::Seq,
        );
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return dim_err(format!(
                "cannot multiply transpose of {:?} by {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        matmul(
            out.view_mut(),
            Accum::Replace,
            self.view().transpose(),
            other.view(),
            1.0,
            Par::Seq,
        );
        Ok(out)
    }

    pub(crate) fn view(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
    }

    pub(crate) fn view_mut(&mut self) -> faer::MatMut<'_, f64> {
        faer::MatMut::from_column_major_slice_mut(&mut self.data, self.rows, self.cols)
    }

    pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Nonincreasing sequence of nonnegative values.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SingularValues(Vec<f64>);

impl SingularValues {
    /// Validates that `values` is finite, nonnegative and nonincreasing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("invalid singular value {v}")));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "singular values must be nonincreasing".into(),
            ));
        }
        Ok(Self(values))
    }

    /// Sorts `values` into nonincreasing order first.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    /// Leading `k` values (all of them if `k` exceeds the length).
    pub fn truncated(&self, k: usize) -> Self {
        Self(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SingularValues {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Thin QR factors: `q` is m×k with orthonormal columns, `r` is k×k upper
/// triangular.
#[derive(Clone, Debug)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

fn check_tall(a: &DenseMatrix, what: &str) -> Result<()> {
    if a.rows < a.cols {
        return dim_err(format!(
            "{what} needs rows >= cols, got {}x{}",
            a.rows, a.cols
        ));
    }
    Ok(())
}

fn upper_triangle(r: MatRef<'_, f64>, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(k, k, |i, j| if i <= j { r[(i, j)] } else { 0.0 })
}

/// Householder thin QR of a tall matrix.
pub fn qr_thin(a: &DenseMatrix) -> Result<QrFactors> {
    check_tall(a, "thin QR")?;
    let qr = a.view().qr();
    let q = DenseMatrix::from_faer(qr.compute_thin_Q().as_ref());
    let r = upper_triangle(qr.R(), a.cols);
    Ok(QrFactors { q, r })
}

/// R factor of the thin QR without forming Q.
pub fn qr_r(a: &DenseMatrix) -> Result<DenseMatrix> {
    check_tall(a, "thin QR")?;
    let qr = a.view().qr();
    Ok(upper_triangle(qr.R(), a.cols))
}

/// R factor of a column-pivoted thin QR, `A·P = Q·R`. The pivoting makes
/// `|diag(R)|` nonincreasing.
pub fn qr_r_pivoted(a: &DenseMatrix) -> Result<DenseMatrix> {
    check_tall(a, "pivoted QR")?;
    let qr = a.view().col_piv_qr();
    Ok(upper_triangle(qr.R(), a.cols))
}

/// All `min(rows, cols)` singular values, nonincreasing.
pub fn singular_values(a: &DenseMatrix) -> Result<SingularValues> {
    if a.is_empty() {
        return dim_err("singular values of an empty matrix");
    }
    let owned_t;
    let tall = if a.rows >= a.cols {
        a
    } else {
        owned_t = a.transpose();
        &owned_t
    };
    let values = if tall.rows as f64 >= QR_PRECONDITION_RATIO * tall.cols as f64 {
        let r = qr_r(tall)?;
        r.view().singular_values()
    } else {
        tall.view().singular_values()
    }
    .map_err(|_| Error::NoConvergence)?;
    SingularValues::from_unsorted(values.into_iter().map(|v| v.max(0.0)).collect())
}

/// Singular value decomposition `a = u · diag(s) · vᵀ` with thin factors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: SingularValues,
    pub v: DenseMatrix,
}

pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if a.is_empty() {
        return dim_err("SVD of an empty matrix");
    }
    let f = a.view().thin_svd().map_err(|_| Error::NoConvergence)?;
    let s: Vec<f64> = f.S().column_vector().iter().map(|v| v.max(0.0)).collect();
    Ok(Svd {
        u: DenseMatrix::from_faer(f.U()),
        s: SingularValues::new(s)?,
        v: DenseMatrix::from_faer(f.V()),
    })
}

/// `|diag(R)|` of the thin QR, sorted nonincreasing: a cheap surrogate for
/// the singular values when the columns have been randomly mixed.
pub fn qr_diag_estimates(a: &DenseMatrix) -> Result<SingularValues> {
    let r = qr_r(a)?;
    SingularValues::from_unsorted(r.diagonal().into_iter().map(f64::abs).collect())
}

/// Largest squared row norm of a matrix with orthonormal columns.
pub fn coherence(u: &DenseMatrix) -> Result<f64> {
    let deviation = orthonormality_error(u)?;
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    let mut row_sq = vec![0.0; u.rows];
    for j in 0..u.cols {
        for (acc, v) in row_sq.iter_mut().zip(u.col(j)) {
            *acc += v * v;
        }
    }
    Ok(row_sq.into_iter().fold(0.0, f64::max))
}

/// `max |QᵀQ − I|` entrywise.
pub fn orthonormality_error(q: &DenseMatrix) -> Result<f64> {
    let g = q.t_matmul(q)?;
    let mut worst: f64 = 0.0;
    for j in 0..g.cols {
        for i in 0..g.rows {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - target).abs());
        }
    }
    Ok(worst)
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
        }
    }

    fn pseudo_random(rows: usize, cols: usize, salt: u64) -> DenseMatrix {
        let mut s = salt
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        DenseMatrix::from_fn(rows, cols, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(matches!(
            DenseMatrix::from_col_major(2, 2, vec![1.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DenseMatrix::from_col_major(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn row_major_and_transpose_agree() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.col(2), &[3.0, 6.0]);
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.get(2, 1), 6.0);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn qr_of_identity_is_identity_up_to_signs() {
        let f = qr_thin(&DenseMatrix::identity(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((f.q.get(i, j).abs() - want).abs() < 1e-15);
                assert!((f.r.get(i, j).abs() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn qr_of_unit_column() {
        let a = DenseMatrix::from_col_major(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let f = qr_thin(&a).unwrap();
        assert!((f.r.get(0, 0).abs() - 1.0).abs() < 1e-15);
        assert!((f.q.get(0, 0).abs() - 1.0).abs() < 1e-15);
        assert!(f.q.get(1, 0).abs() < 1e-15 && f.q.get(2, 0).abs() < 1e-15);
    }

    #[test]
    fn qr_reconstructs_random_input() {
        let a = pseudo_random(50, 10, 3);
        let f = qr_thin(&a).unwrap();
        let resid = frobenius_norm(&f.q.matmul(&f.r).unwrap().sub(&a).unwrap());
        assert!(resid / frobenius_norm(&a) < 1e-13);
        assert!(orthonormality_error(&f.q).unwrap() < 1e-14);
        for j in 0..10 {
            for i in j + 1..10 {
                assert_eq!(f.r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn qr_rejects_wide_input() {
        assert!(matches!(
            qr_thin(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(qr_diag_estimates(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn singular_values_of_diagonal() {
        let a = DenseMatrix::from_diagonal(3, 3, &[3.0, 2.0, 1.0]).unwrap();
        assert_close(&singular_values(&a).unwrap(), &[3.0, 2.0, 1.0], 1e-14);
        let wide = DenseMatrix::from_diagonal(2, 5, &[-4.0, 0.5]).unwrap();
        assert_close(&singular_values(&wide).unwrap(), &[4.0, 0.5], 1e-14);
    }

    #[test]
    fn singular_values_of_isometry_are_ones() {
        let q = qr_thin(&pseudo_random(40, 7, 11)).unwrap().q;
        assert_close(&singular_values(&q).unwrap(), &[1.0; 7], 1e-12);
    }

    #[test]
    fn singular_values_of_shear_match_golden_ratio() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = singular_values(&a).unwrap();
        assert!((s[0] - phi).abs() / phi < 1e-14);
        assert!((s[1] - 1.0 / phi).abs() * phi < 1e-14);
    }

    #[test]
    fn singular_values_reject_empty() {
        assert!(singular_values(&DenseMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn qr_diag_of_triangular_and_isometry() {
        let a = DenseMatrix::from_diagonal(3, 3, &[3.0, 2.0, 1.0]).unwrap();
        assert_close(&qr_diag_estimates(&a).unwrap(), &[3.0, 2.0, 1.0], 1e-15);
        let q = qr_thin(&pseudo_random(30, 6, 5)).unwrap().q;
        assert_close(&qr_diag_estimates(&q).unwrap(), &[1.0; 6], 1e-12);
    }

    #[test]
    fn coherence_extremes() {
        let m = 16;
        let e = DenseMatrix::identity(m).columns(0..3);
        assert_eq!(coherence(&e).unwrap(), 1.0);
        let flat = DenseMatrix::from_fn(m, 1, |i, _| if i % 3 == 0 { -0.25 } else { 0.25 });
        assert!((coherence(&flat).unwrap() - 1.0 / m as f64).abs() < 1e-15);
        let not_orth = DenseMatrix::from_fn(m, 1, |_, _| 1.0);
        assert!(matches!(
            coherence(&not_orth),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn norms() {
        let z = DenseMatrix::zeros(4, 3);
        assert_eq!(frobenius_norm(&z), 0.0);
        assert_eq!(spectral_norm(&z).unwrap(), 0.0);
        let i = DenseMatrix::identity(5);
        assert!((frobenius_norm(&i) - 5f64.sqrt()).abs() < 1e-15);
        assert!((spectral_norm(&i).unwrap() - 1.0).abs() < 1e-15);
        let u = [0.6, 0.8, 0.0];
        let v = [0.0, 1.0];
        let uv = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        assert!((frobenius_norm(&uv) - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&uv).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs() {
        let a = pseudo_random(12, 8, 9);
        let f = svd(&a).unwrap();
        let us = DenseMatrix::from_fn(12, 8, |i, j| f.u.get(i, j) * f.s[j]);
        let back = us.matmul(&f.v.transpose()).unwrap();
        assert!(frobenius_norm(&back.sub(&a).unwrap()) < 1e-13);
    }

    #[test]
    fn hcat_and_blocks() {
        let a = pseudo_random(4, 3, 1);
        let b = a.columns(0..1).hcat(&a.columns(1..3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_block(1..3).row(0), a.row(1));
    }

    #[test]
    fn pivoted_r_has_nonincreasing_diagonal() {
        let a = DenseMatrix::from_fn(9, 5, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 * (j as f64 + 0.5) - 1.0
        });
        let r = qr_r_pivoted(&a).unwrap();
        let d: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
        assert!(d.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{d:?}");
        let prod: f64 = d.iter().product();
        let sv_prod: f64 = singular_values(&a).unwrap().iter().product();
        assert!((prod - sv_prod).abs() <= 1e-10 * sv_prod.max(1.0));
    }
}

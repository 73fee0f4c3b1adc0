//! Dense linear algebra and geometry primitives.
//!
//! Every factorization in the crate goes through [`svd`], which sorts singular
//! values in descending order and fixes the sign of each singular vector pair
//! so that the largest-magnitude entry of every right singular vector is
//! positive. PCA, principal angles and the subspace baselines inherit that
//! determinism.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used when validating orthonormal bases.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Dense real matrix, one example per row.
///
/// Entries are always finite and the shape is at least 1×1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::invalid(format!(
                "feature matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            // nalgebra storage is column-major
            let (r, c) = (pos % m.nrows(), pos / m.nrows());
            return Err(Error::Data(format!("non-finite value at row {r}, column {c}")));
        }
        Ok(FeatureMatrix(m))
    }

    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.0.row(r).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r)).collect()
    }

    /// Rows at the given indices, in order. Indices may repeat.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("cannot select zero rows"));
        }
        Ok(FeatureMatrix(self.0.select_rows(idx)))
    }

    /// Stack matrices vertically. All parts must have the same column count.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to stack"))?;
        let cols = first.cols();
        if parts.iter().any(|p| p.cols() != cols) {
            return Err(Error::invalid("column mismatch in vstack"));
        }
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            out.rows_mut(at, p.rows()).copy_from(&p.0);
            at += p.rows();
        }
        Ok(FeatureMatrix(out))
    }

    pub fn column_means(&self) -> DVector<f64> {
        let mut mean = DVector::zeros(self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                mean[c] += self.0[(r, c)];
            }
        }
        mean / self.rows() as f64
    }

    /// Scale every row to unit Euclidean norm. Zero rows are left untouched.
    pub fn l2_normalized_rows(&self) -> Self {
        let mut m = self.0.clone();
        for mut row in m.row_iter_mut() {
            let n = row.norm();
            if n > 0.0 {
                row /= n;
            }
        }
        FeatureMatrix(m)
    }
}

/// Orthonormal basis of a low-dimensional linear embedding, with the
/// centering offset that was removed before it was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
    mean: DVector<f64>,
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        let (d, k) = basis.shape();
        if k == 0 || k > d {
            return Err(Error::invalid(format!("subspace of dimension {k} in ambient {d}")));
        }
        if mean.len() != d {
            return Err(Error::invalid("mean length does not match ambient dimension"));
        }
        let gram = basis.transpose() * &basis;
        let err = max_abs(&(gram - DMatrix::identity(k, k)));
        if !(err < ORTHONORMAL_TOL) {
            return Err(Error::invalid(format!("basis is not orthonormal (error {err:e})")));
        }
        Ok(Subspace { basis, mean })
    }

    /// Subspace through the origin.
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.nrows();
        Self::new(basis, DVector::zeros(d))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

/// Thin singular value decomposition `m = u * diag(s) * vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD with descending singular values and the sign convention described
/// in the module docs.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let raw = nalgebra::SVD::new(m.clone(), true, true);
    let u = raw.u.expect("u requested");
    let v = raw.v_t.expect("v_t requested").transpose();
    let s = raw.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut u_out = DMatrix::zeros(u.nrows(), order.len());
    let mut v_out = DMatrix::zeros(v.nrows(), order.len());
    let mut s_out = DVector::zeros(order.len());
    for (dst, &src) in order.iter().enumerate() {
        let vc = v.column(src);
        let sign = if vc[largest_magnitude_index(vc.iter().copied())] < 0.0 { -1.0 } else { 1.0 };
        v_out.set_column(dst, &(vc * sign));
        u_out.set_column(dst, &(u.column(src) * sign));
        s_out[dst] = s[src];
    }
    Svd {
        u: u_out,
        singular_values: s_out,
        v: v_out,
    }
}

fn largest_magnitude_index(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in it.enumerate() {
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best.0
}

/// Flip the sign of each column so its largest-magnitude entry is positive.
pub fn canonicalize_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let i = largest_magnitude_index(col.iter().copied());
        if col[i] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Top-`k` principal directions of the mean-centered rows of `x`.
pub fn pca(x: &FeatureMatrix, k: usize) -> Result<Subspace> {
    let (rows, cols) = (x.rows(), x.cols());
    let max_k = (rows.saturating_sub(1)).min(cols);
    if k < 1 || k > max_k {
        return Err(Error::invalid(format!(
            "pca dimension {k} outside [1, {max_k}] for a {rows}x{cols} matrix"
        )));
    }
    let mean = x.column_means();
    let mut centered = x.as_matrix().clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scale = x.as_matrix().norm().max(1.0);
    let dec = svd(&centered);
    if dec.singular_values[0] <= 1e-12 * scale {
        return Err(Error::DegenerateData("zero-variance data has no principal directions".into()));
    }
    let basis = dec.v.columns(0, k).into_owned();
    Subspace::new(basis, mean)
}

/// Orthonormal basis of the orthogonal complement of `s`, shape `d × (d − k)`.
pub fn orthonormal_complement(s: &Subspace) -> Result<DMatrix<f64>> {
    let (d, k) = (s.ambient_dim(), s.dim());
    if k >= d {
        return Err(Error::invalid("subspace spans the ambient space; complement is empty"));
    }
    let b = s.basis();
    let projector = DMatrix::identity(d, d) - b * b.transpose();
    let dec = svd(&projector);
    Ok(dec.v.columns(0, d - k).into_owned())
}

pub(crate) fn check_same_shape(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient_dim() != v.ambient_dim() || u.dim() != v.dim() {
        return Err(Error::invalid(format!(
            "subspace shapes differ: {}x{} vs {}x{}",
            u.ambient_dim(),
            u.dim(),
            v.ambient_dim(),
            v.dim()
        )));
    }
    Ok(())
}


/// Principal angles between two equal-dimension subspaces, ascending, in radians.
pub fn principal_angles(u: &Subspace, v: &Subspace) -> Result<Vec<f64>> {
    check_same_shape(u, v)?;
    let cross = u.basis().transpose() * v.basis();
    let dec = svd(&cross);
    // descending singular values give ascending angles
    Ok(dec
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect())
}

/// Subspace dimension used by the SA and GFK baselines when none is given.
pub fn default_subspace_dim(cols: usize, rows_source: usize, rows_target: usize) -> usize {
    cols.min(20)
        .min(rows_source.saturating_sub(1))
        .min(rows_target.saturating_sub(1))
}

/// Composite trapezoid rule for a matrix-valued integrand on `[a, b]`.
pub fn trapezoid_matrix<F>(f: F, a: f64, b: f64, steps: usize) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    assert!(steps >= 1, "trapezoid needs at least one step");
    let h = (b - a) / steps as f64;
    let mut acc = (f(a) + f(b)) * 0.5;
    for i in 1..steps {
        acc += f(a + h * i as f64);
    }
    acc * h
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

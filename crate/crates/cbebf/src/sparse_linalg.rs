//! Sparse vectors, dense matrices, weighted norms, and the SVD-backed
//! least-squares solver the rest of the crate builds on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A k-sparse vector in a D-dimensional space.
///
/// Only non-zero entries are stored, as (index, value) pairs with strictly
/// increasing indices. Feature observations additionally keep their L2 norm
/// at or below 1; that is enforced by the encoders that produce them, not
/// by this type.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    /// Build from (index, value) pairs. Indices must be strictly increasing
    /// and within bounds; values must be non-zero and finite.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("SparseVec dim must be positive".into()));
        }
        let mut prev: Option<usize> = None;
        for &(idx, val) in &entries {
            if idx >= dim {
                return Err(Error::dim(dim, idx));
            }
            if let Some(p) = prev {
                if idx <= p {
                    return Err(Error::InvalidArgument(format!(
                        "indices must be strictly increasing (saw {p} then {idx})"
                    )));
                }
            }
            if !val.is_finite() {
                return Err(Error::NonFinite { context: "SparseVec entry" });
            }
            if val == 0.0 {
                return Err(Error::InvalidArgument(format!("stored zero at index {idx}")));
            }
            prev = Some(idx);
        }
        Ok(Self { dim, entries })
    }

    /// Vector of all zeros.
    pub fn empty(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Indicator vector: a single 1.0 at `index`.
    pub fn one_hot(dim: usize, index: usize) -> Result<Self> {
        Self::new(dim, vec![(index, 1.0)])
    }

    /// Build from a dense slice, dropping zeros.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self::new(dense.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Scale every stored value; scaling by zero yields the empty vector.
    pub fn scaled(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::empty(self.dim);
        }
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Sparse-sparse inner product by index merge.
    pub fn dot_sparse(&self, other: &SparseVec) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::dim(self.dim, other.dim));
        }
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        Ok(acc)
    }
}

/// Inner product of a sparse vector with a dense one; O(nnz).
pub fn sparse_dot(x: &SparseVec, v: &[f64]) -> Result<f64> {
    if v.len() != x.dim() {
        return Err(Error::dim(x.dim(), v.len()));
    }
    Ok(x.iter().map(|(i, val)| val * v[i]).sum())
}

/// A dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "DenseMatrix entry" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// Minimum-norm least-squares solution of A w = y.
#[derive(Debug, Clone)]
pub struct OlsSolution {
    /// Fitted coefficients, length = number of columns of A.
    pub weights: Vec<f64>,
    /// Numerical rank at the cutoff used.
    pub rank: usize,
    /// Singular values of A, descending.
    pub singular_values: Vec<f64>,
}

/// Ordinary least squares through the SVD pseudo-inverse.
///
/// Singular values below `sigma_max * max(rows, cols) * eps_machine` are
/// treated as zero, so rank-deficient systems get the minimum-norm solution
/// instead of blowing up.
pub fn ols_fit(a: &DenseMatrix, y: &[f64]) -> Result<OlsSolution> {
    if y.len() != a.rows() {
        return Err(Error::dim(a.rows(), y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "ols_fit targets" });
    }

    let m = DMatrix::from_row_slice(a.rows(), a.cols(), a.data());
    let svd = m.svd(true, true);

    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * a.rows().max(a.cols()) as f64 * f64::EPSILON;
    let rank = singular_values.iter().filter(|s| **s > cutoff).count();

    let rhs = DVector::from_column_slice(y);
    let solution = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    Ok(OlsSolution {
        weights: solution.iter().copied().collect(),
        rank,
        singular_values,
    })
}

/// Weighted L2 norm sqrt(sum_i w_i * v_i^2) for a probability weighting.
pub fn weighted_l2(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::dim(values.len(), weights.len()));
    }
    let mut sum_w = 0.0;
    let mut acc = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        if w < 0.0 {
            return Err(Error::InvalidArgument(format!("negative weight {w}")));
        }
        sum_w += w;
        acc += w * v * v;
    }
    if (sum_w - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("weights sum to {sum_w}, expected 1")));
    }
    Ok(acc.sqrt())
}

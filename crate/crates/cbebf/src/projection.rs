//! Seeded Gaussian random projections with lazy per-row generation, and the
//! high-probability bound on the inner-product distortion they introduce.
//!
//! The D x d matrix is never materialized: row i is regenerated on demand as
//! a pure function of (seed, i), so projecting a k-sparse vector costs
//! O(k * d) regardless of D.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, gaussian_pair};
use crate::sparse_linalg::SparseVec;

/// A D x d matrix of i.i.d. Normal(0, 1/d) entries, identified by its seed.
///
/// Immutable and cheap to clone; all queries are pure and reentrant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMatrix {
    big_dim: usize,
    small_dim: usize,
    seed: u64,
}

impl ProjectionMatrix {
    pub fn new(big_dim: usize, small_dim: usize, seed: u64) -> Result<Self> {
        if small_dim < 1 {
            return Err(Error::InvalidArgument("projection size d must be >= 1".into()));
        }
        if big_dim < small_dim {
            return Err(Error::InvalidArgument(format!(
                "need D >= d, got D={big_dim}, d={small_dim}"
            )));
        }
        Ok(Self { big_dim, small_dim, seed })
    }

    pub fn big_dim(&self) -> usize {
        self.big_dim
    }

    pub fn small_dim(&self) -> usize {
        self.small_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn scale(&self) -> f64 {
        // entry variance 1/d
        1.0 / (self.small_dim as f64).sqrt()
    }

    /// Materialize row i. Bit-identical across repeated calls.
    pub fn row(&self, index: usize) -> Vec<f64> {
        assert!(index < self.big_dim, "row {index} out of range {}", self.big_dim);
        let mut out = vec![0.0; self.small_dim];
        self.for_each_row_entry(index, |j, phi| out[j] = phi);
        out
    }

    /// Accumulate `out += coeff * row(index)` without allocating.
    #[inline]
    fn add_scaled_row(&self, index: usize, coeff: f64, out: &mut [f64]) {
        self.for_each_row_entry(index, |j, phi| out[j] += coeff * phi);
    }

    /// Inner product of row(index) with a dense d-vector.
    pub fn dot_row(&self, index: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.small_dim);
        let mut acc = 0.0;
        self.for_each_row_entry(index, |j, phi| acc += phi * v[j]);
        acc
    }

    #[inline]
    fn for_each_row_entry(&self, index: usize, mut f: impl FnMut(usize, f64)) {
        let row_seed = derive_seed(self.seed, index as u64);
        let s = self.scale();
        let d = self.small_dim;
        let mut j = 0;
        let mut pair = 0u64;
        while j < d {
            let (a, b) = gaussian_pair(row_seed, pair);
            f(j, a * s);
            if j + 1 < d {
                f(j + 1, b * s);
            }
            j += 2;
            pair += 1;
        }
    }

    /// Compressed features Phi^T x; costs O(nnz(x) * d), independent of D.
    pub fn project(&self, x: &SparseVec) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.small_dim];
        self.project_into(x, &mut out)?;
        Ok(out)
    }

    /// Like [`project`](Self::project) but writing into a caller buffer.
    pub fn project_into(&self, x: &SparseVec, out: &mut [f64]) -> Result<()> {
        if x.dim() != self.big_dim {
            return Err(Error::dim(self.big_dim, x.dim()));
        }
        if out.len() != self.small_dim {
            return Err(Error::dim(self.small_dim, out.len()));
        }
        out.fill(0.0);
        for (idx, val) in x.iter() {
            self.add_scaled_row(idx, val, out);
        }
        Ok(())
    }
}

/// High-probability bound on the inner-product distortion of a random
/// projection on a k-sparse D-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasBound {
    pub k: usize,
    pub big_dim: usize,
    pub small_dim: usize,
    pub xi: f64,
    pub eps_prj: f64,
}

/// eps_prj = sqrt(48 k / d * ln(4 D / xi)); holds with probability > 1 - xi.
pub fn eps_prj(k: usize, big_dim: usize, small_dim: usize, xi: f64) -> Result<BiasBound> {
    if k < 1 {
        return Err(Error::InvalidArgument("sparsity k must be >= 1".into()));
    }
    if small_dim < 1 || big_dim < small_dim {
        return Err(Error::InvalidArgument(format!(
            "need D >= d >= 1, got D={big_dim}, d={small_dim}"
        )));
    }
    if !(0.0 < xi && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("xi must be in (0,1), got {xi}")));
    }
    let eps = (48.0 * k as f64 / small_dim as f64 * (4.0 * big_dim as f64 / xi).ln()).sqrt();
    Ok(BiasBound { k, big_dim, small_dim, xi, eps_prj: eps })
}

/// Smallest d achieving a target eps_prj, clamped to [1, D].
pub fn projection_size_for(k: usize, big_dim: usize, xi: f64, target_eps: f64) -> Result<usize> {
    if target_eps <= 0.0 {
        return Err(Error::InvalidArgument("target eps must be positive".into()));
    }
    if !(0.0 < xi && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("xi must be in (0,1), got {xi}")));
    }
    let raw = 48.0 * k as f64 * (4.0 * big_dim as f64 / xi).ln() / (target_eps * target_eps);
    Ok((raw.ceil() as usize).clamp(1, big_dim))
}

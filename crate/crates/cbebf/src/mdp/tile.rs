//! Tile coding: piecewise-constant encoding of a continuous point into a
//! high-dimensional sparse feature vector with exactly one active cell per
//! offset grid.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse_linalg::SparseVec;

/// A bank of randomly offset grids over a bounded box.
///
/// Output dimension is `n_grids * product(tiles)`; every encoding activates
/// exactly `n_grids` indices, each valued `1/sqrt(n_grids)` so encoded
/// observations have unit L2 norm.
#[derive(Debug, Clone)]
pub struct TileCoder {
    bounds: Vec<(f64, f64)>,
    tiles: Vec<usize>,
    n_grids: usize,
    /// grid-major offsets, each in [0, 1/tiles[dim})
    offsets: Vec<f64>,
    strides: Vec<usize>,
    grid_size: usize,
}

impl TileCoder {
    /// Grids are placed at offsets drawn deterministically from `seed`.
    /// `tiles` gives the number of tiles per dimension.
    pub fn new(bounds: Vec<(f64, f64)>, tiles: Vec<usize>, n_grids: usize, seed: u64) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != tiles.len() {
            return Err(Error::InvalidArgument(
                "bounds and tiles must be non-empty and of equal length".into(),
            ));
        }
        if n_grids < 1 {
            return Err(Error::InvalidArgument("need at least one grid".into()));
        }
        if tiles.iter().any(|t| *t < 1) {
            return Err(Error::InvalidArgument("need at least one tile per dimension".into()));
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("bounds must satisfy low < high".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_dims = tiles.len();
        let mut offsets = Vec::with_capacity(n_grids * n_dims);
        for _ in 0..n_grids {
            for &t in &tiles {
                offsets.push(rng.gen_range(0.0..1.0 / t as f64));
            }
        }

        let mut strides = vec![1usize; n_dims];
        for d in (0..n_dims - 1).rev() {
            strides[d] = strides[d + 1] * tiles[d + 1];
        }
        let grid_size = strides[0] * tiles[0];

        Ok(Self { bounds, tiles, n_grids, offsets, strides, grid_size })
    }

    /// Uniform construction over the unit box [0,1]^n_dims.
    pub fn uniform_unit(n_dims: usize, tiles_per_dim: usize, n_grids: usize, seed: u64) -> Result<Self> {
        Self::new(vec![(0.0, 1.0); n_dims], vec![tiles_per_dim; n_dims], n_grids, seed)
    }

    pub fn n_dims(&self) -> usize {
        self.tiles.len()
    }

    /// Number of active features per encoding (the sparsity k).
    pub fn n_grids(&self) -> usize {
        self.n_grids
    }

    pub fn output_dim(&self) -> usize {
        self.n_grids * self.grid_size
    }

    /// Encode a point; coordinates outside the bounds are clamped.
    pub fn encode(&self, point: &[f64]) -> Result<SparseVec> {
        let n_dims = self.n_dims();
        if point.len() != n_dims {
            return Err(Error::dim(n_dims, point.len()));
        }
        let value = 1.0 / (self.n_grids as f64).sqrt();
        let mut entries = Vec::with_capacity(self.n_grids);
        for g in 0..self.n_grids {
            let mut index = g * self.grid_size;
            for d in 0..n_dims {
                let (lo, hi) = self.bounds[d];
                let unit = ((point[d] - lo) / (hi - lo)).clamp(0.0, 1.0);
                let shifted = unit + self.offsets[g * n_dims + d];
                let tile = ((shifted * self.tiles[d] as f64) as usize).min(self.tiles[d] - 1);
                index += tile * self.strides[d];
            }
            entries.push((index, value));
        }
        // per-grid index ranges are disjoint and increasing in g
        SparseVec::new(self.output_dim(), entries)
    }
}

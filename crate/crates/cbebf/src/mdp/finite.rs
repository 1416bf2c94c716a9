//! Tabular fixed-policy chains with exact policy-evaluation answers.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse_linalg::DenseMatrix;

const ROW_SUM_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-10;
const STATIONARY_MAX_ITERS: usize = 1_000_000;
const NORM_POWER_TOL: f64 = 1e-10;

/// A finite Markov chain with per-state rewards and a discount factor.
/// The policy is already folded into the transition matrix.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    transition: DenseMatrix,
    reward: Vec<f64>,
    gamma: f64,
}

impl FiniteMdp {
    /// Validates row-stochasticity, non-negative bounded rewards, and
    /// gamma in [0, 1).
    pub fn new(transition: DenseMatrix, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        let s = transition.rows();
        if transition.cols() != s {
            return Err(Error::dim(s, transition.cols()));
        }
        if reward.len() != s {
            return Err(Error::dim(s, reward.len()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must be in [0,1), got {gamma}")));
        }
        for i in 0..s {
            let row = transition.row(i);
            if row.iter().any(|p| *p < 0.0) {
                return Err(Error::InvalidArgument(format!("negative probability in row {i}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {i} sums to {sum}, expected 1")));
            }
        }
        if reward.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument("rewards must be finite and >= 0".into()));
        }
        Ok(Self { transition, reward, gamma })
    }

    /// A dense aperiodic chain with uniform-random transition rows and
    /// rewards in [0, 1]; handy for randomized checks and experiments.
    pub fn random_chain(n_states: usize, gamma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n_states * n_states);
        for _ in 0..n_states {
            let raw: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            data.extend(raw.into_iter().map(|p| p / sum));
        }
        let reward: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.0..1.0)).collect();
        Self::new(DenseMatrix::new(n_states, n_states, data)?, reward, gamma)
    }

    /// Parse the plain-text format: first line "S gamma", then S transition
    /// rows, then one line of rewards (whitespace-separated decimals).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty MDP file".into()))?;
        let mut head = header.split_whitespace();
        let s: usize = head
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad state count in header".into()))?;
        let gamma: f64 = head
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad gamma in header".into()))?;

        let parse_row = |line: &str, expected: usize, what: &str| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad number in {what}: {e}")))?;
            if row.len() != expected {
                return Err(Error::Config(format!(
                    "{what} has {} values, expected {expected}",
                    row.len()
                )));
            }
            Ok(row)
        };

        let mut data = Vec::with_capacity(s * s);
        for i in 0..s {
            let line = lines
                .next()
                .ok_or_else(|| Error::Config(format!("missing transition row {i}")))?;
            data.extend(parse_row(line, s, &format!("transition row {i}"))?);
        }
        let reward_line = lines
            .next()
            .ok_or_else(|| Error::Config("missing reward line".into()))?;
        let reward = parse_row(reward_line, s, "reward line")?;
        Self::new(DenseMatrix::new(s, s, data)?, reward, gamma)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn transition(&self) -> &DenseMatrix {
        &self.transition
    }

    pub fn r_max(&self) -> f64 {
        self.reward.iter().cloned().fold(0.0, f64::max)
    }

    fn transition_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_states(), self.n_states(), self.transition.data())
    }

    /// Exact value of the fixed policy: solves (I - gamma P) V = R directly.
    pub fn exact_value(&self) -> Result<Vec<f64>> {
        let s = self.n_states();
        let mut a = -self.gamma * self.transition_na();
        for i in 0..s {
            a[(i, i)] += 1.0;
        }
        let r = DVector::from_column_slice(&self.reward);
        let v = a
            .clone()
            .lu()
            .solve(&r)
            .ok_or(Error::SingularSystem("exact_value"))?;
        let residual = (&a * &v - &r).amax();
        if residual > 1e-9 * self.r_max().max(1.0) {
            return Err(Error::SingularSystem("exact_value residual"));
        }
        Ok(v.iter().copied().collect())
    }

    /// One application of the Bellman operator: R + gamma P v.
    pub fn bellman_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let s = self.n_states();
        if v.len() != s {
            return Err(Error::dim(s, v.len()));
        }
        Ok((0..s)
            .map(|i| {
                let row = self.transition.row(i);
                self.reward[i] + self.gamma * row.iter().zip(v).map(|(p, vj)| p * vj).sum::<f64>()
            })
            .collect())
    }

    /// Bellman residual T v - v.
    pub fn bellman_error(&self, v: &[f64]) -> Result<Vec<f64>> {
        let tv = self.bellman_apply(v)?;
        Ok(tv.iter().zip(v).map(|(t, vi)| t - vi).collect())
    }

    /// Stationary distribution via power iteration from the uniform start.
    ///
    /// Errors when the fixed space of P is more than one-dimensional (the
    /// chain is reducible, so the distribution is not unique) or when the
    /// iteration fails to converge (periodic chains can oscillate).
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let s = self.n_states();
        if !self.has_unique_stationary() {
            return Err(Error::NonUniqueStationary);
        }
        let mut rho = vec![1.0 / s as f64; s];
        let mut next = vec![0.0; s];
        for _ in 0..STATIONARY_MAX_ITERS {
            next.fill(0.0);
            for (i, &ri) in rho.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                for (j, p) in self.transition.row(i).iter().enumerate() {
                    next[j] += ri * p;
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            let l1: f64 = rho.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut rho, &mut next);
            if l1 <= STATIONARY_TOL {
                return Ok(rho);
            }
        }
        Err(Error::NonConvergence {
            what: "stationary distribution power iteration",
            iterations: STATIONARY_MAX_ITERS,
        })
    }

    /// The stationary distribution is unique iff rank(P^T - I) = S - 1.
    fn has_unique_stationary(&self) -> bool {
        let s = self.n_states();
        let mut a = self.transition_na().transpose();
        for i in 0..s {
            a[(i, i)] -= 1.0;
        }
        let svd = a.svd(false, false);
        let sigma_max = svd.singular_values.max();
        let cutoff = (sigma_max * s as f64 * f64::EPSILON * 64.0).max(1e-12);
        let rank = svd.singular_values.iter().filter(|v| **v > cutoff).count();
        rank == s - 1
    }

    /// Worst-case total-variation forgetting profile up to horizon n.
    ///
    /// Entry (i, j) holds sqrt of the largest TV distance between rows of
    /// P^(j-i); it depends on j - i only because the chain is homogeneous.
    pub fn mixing_matrix(&self, n: usize) -> Result<MixingMatrix> {
        if n < 1 {
            return Err(Error::InvalidArgument("mixing horizon must be >= 1".into()));
        }
        let s = self.n_states();
        let p = self.transition_na();
        let mut power = DMatrix::<f64>::identity(s, s);
        let mut by_offset = vec![1.0];
        for _ in 1..n {
            power *= &p;
            let mut worst: f64 = 0.0;
            for x in 0..s {
                for y in (x + 1)..s {
                    let tv: f64 = (0..s)
                        .map(|j| (power[(x, j)] - power[(y, j)]).abs())
                        .sum::<f64>()
                        / 2.0;
                    worst = worst.max(tv);
                }
            }
            by_offset.push(worst.min(1.0).sqrt());
        }

        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                entries[i * n + j] = by_offset[j - i];
            }
        }
        Ok(MixingMatrix { n, entries })
    }
}

/// Upper-triangular matrix of worst-case multi-step TV distances; its
/// squared operator norm is the chain's forgetting time.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl MixingMatrix {
    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Spectral norm via power iteration on Gamma^T Gamma.
    pub fn operator_norm(&self) -> f64 {
        let n = self.n;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            // u = Gamma v, w = Gamma^T u
            let mut u = vec![0.0; n];
            for i in 0..n {
                for j in i..n {
                    u[i] += self.entries[i * n + j] * v[j];
                }
            }
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in i..n {
                    w[j] += self.entries[i * n + j] * u[i];
                }
            }
            let new_lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.into_iter().map(|x| x / norm).collect();
            if (new_lambda - lambda).abs() <= NORM_POWER_TOL * new_lambda.max(1.0) {
                return new_lambda.max(0.0).sqrt();
            }
            lambda = new_lambda;
        }
        lambda.max(0.0).sqrt()
    }
}

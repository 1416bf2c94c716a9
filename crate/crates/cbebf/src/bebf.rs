//! Compressed Bellman-error feature generation.
//!
//! Each round draws a fresh random projection, regresses the current TD
//! errors on the compressed inputs, and folds the fitted direction back into
//! a dense weight vector with constant weight 1. Per-round cost never scales
//! with the ambient dimension beyond the feature rows actually observed.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::projection::ProjectionMatrix;
use crate::rng::derive_seed;
use crate::sparse_linalg::{ols_fit, sparse_dot, DenseMatrix, SparseVec};

/// Anything that prices a sparse observation.
pub trait StateValue {
    fn value_at(&self, x: &SparseVec) -> Result<f64>;
}

/// A linear value function V(x) = x^T w over the original feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    weights: Vec<f64>,
}

impl ValueEstimate {
    pub fn zero(dim: usize) -> Self {
        Self { weights: vec![0.0; dim] }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { context: "ValueEstimate weights" });
        }
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl StateValue for ValueEstimate {
    /// O(nnz(x)).
    fn value_at(&self, x: &SparseVec) -> Result<f64> {
        sparse_dot(x, &self.weights)
    }
}

/// How many rounds to run and when to stop early.
#[derive(Debug, Clone, PartialEq)]
pub enum Stopping {
    /// Run exactly `num_bebfs` rounds and keep the final weights.
    Fixed,
    /// Track the validation error each round; stop after `patience`
    /// consecutive non-improving rounds and keep the best snapshot.
    Validation { patience: usize },
}

/// Projection size per round.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSchedule {
    Constant(usize),
    PerIteration(Vec<usize>),
}

impl ProjectionSchedule {
    fn at(&self, iteration: usize) -> usize {
        match self {
            ProjectionSchedule::Constant(d) => *d,
            ProjectionSchedule::PerIteration(ds) => ds[iteration - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbebfConfig {
    pub num_bebfs: usize,
    pub schedule: ProjectionSchedule,
    pub gamma: f64,
    pub seed: u64,
    pub stopping: Stopping,
}

impl CbebfConfig {
    /// Constant projection size, fixed number of rounds.
    pub fn constant(num_bebfs: usize, d: usize, gamma: f64, seed: u64) -> Self {
        Self {
            num_bebfs,
            schedule: ProjectionSchedule::Constant(d),
            gamma,
            seed,
            stopping: Stopping::Fixed,
        }
    }

    pub fn with_validation_stopping(mut self, patience: usize) -> Self {
        self.stopping = Stopping::Validation { patience };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in [0,1), got {}",
                self.gamma
            )));
        }
        match &self.schedule {
            ProjectionSchedule::Constant(d) => {
                if *d < 1 {
                    return Err(Error::InvalidArgument("projection size must be >= 1".into()));
                }
            }
            ProjectionSchedule::PerIteration(ds) => {
                if ds.len() < self.num_bebfs {
                    return Err(Error::InvalidArgument(format!(
                        "schedule has {} sizes for {} rounds",
                        ds.len(),
                        self.num_bebfs
                    )));
                }
                if ds.iter().any(|d| *d < 1) {
                    return Err(Error::InvalidArgument("projection size must be >= 1".into()));
                }
            }
        }
        if let Stopping::Validation { patience } = self.stopping {
            if patience < 1 {
                return Err(Error::InvalidArgument("patience must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Per-round diagnostics from a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub d: usize,
    pub validation_rp_error: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations_run: usize,
    pub per_iteration: Vec<IterationRecord>,
    /// Round whose weights were returned (0 = the all-zero start).
    pub selected_iteration: usize,
}

/// A labelled evaluation point: observation and its empirical return.
pub type ValidationPoint = (SparseVec, f64);

/// TD errors of an estimate along a trajectory.
pub fn td_errors(traj: &Trajectory, v: &ValueEstimate, gamma: f64) -> Result<Vec<f64>> {
    if v.dim() != traj.dim() {
        return Err(Error::dim(traj.dim(), v.dim()));
    }
    td_errors_from_weights(traj, v.weights(), gamma)
}

fn td_errors_from_weights(traj: &Trajectory, w: &[f64], gamma: f64) -> Result<Vec<f64>> {
    traj.transitions()
        .iter()
        .map(|t| Ok(t.reward + gamma * sparse_dot(&t.x_next, w)? - sparse_dot(&t.x, w)?))
        .collect()
}

fn rms_validation_error(points: &[ValidationPoint], w: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (x, target) in points {
        let diff = target - sparse_dot(x, w)?;
        acc += diff * diff;
    }
    Ok((acc / points.len() as f64).sqrt())
}

/// Run the compressed feature-generation loop on a trajectory.
///
/// Round i draws a projection seeded from (config seed, i), regresses the
/// TD errors on the compressed inputs by least squares, and adds the lifted
/// solution into the weight vector. The lift touches only feature rows seen
/// in the training or validation data; untouched rows stay zero and can
/// never influence a value computed from that data.
///
/// With validation stopping the returned weights are the snapshot of the
/// best round (argmin of validation error over all completed rounds).
pub fn cbebf_fit(
    traj: &Trajectory,
    config: &CbebfConfig,
    validation: Option<&[ValidationPoint]>,
) -> Result<(ValueEstimate, FitReport)> {
    config.validate()?;
    if traj.is_empty() {
        return Err(Error::EmptySample);
    }
    match (&config.stopping, validation) {
        (Stopping::Validation { .. }, None) => {
            return Err(Error::InvalidArgument(
                "validation stopping requires validation data".into(),
            ))
        }
        (_, Some([])) => return Err(Error::EmptySample),
        _ => {}
    }
    if let Some(points) = validation {
        for (x, _) in points {
            if x.dim() != traj.dim() {
                return Err(Error::dim(traj.dim(), x.dim()));
            }
        }
    }

    let big_dim = traj.dim();
    let n = traj.len();

    let mut touched = traj.feature_indices();
    if let Some(points) = validation {
        let mut set: std::collections::BTreeSet<usize> = touched.into_iter().collect();
        for (x, _) in points {
            set.extend(x.iter().map(|(i, _)| i));
        }
        touched = set.into_iter().collect();
    }

    let mut weights = vec![0.0; big_dim];
    let mut report = FitReport {
        iterations_run: 0,
        per_iteration: Vec::new(),
        selected_iteration: 0,
    };

    let mut best_error = f64::INFINITY;
    let mut best_iteration = 0usize;
    let mut best_snapshot: Option<Vec<f64>> = None;
    let mut non_improving = 0usize;

    for iteration in 1..=config.num_bebfs {
        let start = Instant::now();
        let d = config.schedule.at(iteration);
        let phi = ProjectionMatrix::new(big_dim, d, derive_seed(config.seed, iteration as u64))?;

        let deltas = td_errors_from_weights(traj, &weights, config.gamma)?;

        let mut data = vec![0.0; n * d];
        for (row, t) in traj.transitions().iter().enumerate() {
            phi.project_into(&t.x, &mut data[row * d..(row + 1) * d])?;
        }
        let solution = ols_fit(&DenseMatrix::new(n, d, data)?, &deltas)?;

        for &idx in &touched {
            weights[idx] += phi.dot_row(idx, &solution.weights);
        }

        let validation_rp_error = match validation {
            Some(points) => Some(rms_validation_error(points, &weights)?),
            None => None,
        };

        report.per_iteration.push(IterationRecord {
            d,
            validation_rp_error,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        report.iterations_run = iteration;

        if let Stopping::Validation { patience } = config.stopping {
            let err = validation_rp_error.expect("validation data checked above");
            if err < best_error {
                best_error = err;
                best_iteration = iteration;
                best_snapshot = Some(touched.iter().map(|&i| weights[i]).collect());
                non_improving = 0;
            } else {
                non_improving += 1;
                if non_improving >= patience {
                    break;
                }
            }
        }
    }

    match config.stopping {
        Stopping::Fixed => {
            report.selected_iteration = report.iterations_run;
            Ok((ValueEstimate { weights }, report))
        }
        Stopping::Validation { .. } => {
            report.selected_iteration = best_iteration;
            let mut selected = vec![0.0; big_dim];
            if let Some(snapshot) = best_snapshot {
                for (&idx, &w) in touched.iter().zip(&snapshot) {
                    selected[idx] = w;
                }
            }
            Ok((ValueEstimate { weights: selected }, report))
        }
    }
}

//! Experiment harness: Monte Carlo return evaluation, return-prediction
//! error, seeded multi-trial sweeps over methods and settings, and CSV
//! emission in a plot-ready long format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{clstd_fit, ClstdValue};
use crate::bebf::{cbebf_fit, CbebfConfig, StateValue, ValidationPoint};
use crate::error::{Error, Result};
use crate::mdp::{RandomWalkDomain, TileCoder, Trajectory};
use crate::rng::derive_seed;

/// Evaluation points paired with their truncated Monte Carlo returns.
#[derive(Debug, Clone)]
pub struct ReturnsSample {
    pub points: Vec<ValidationPoint>,
    pub horizon_used: usize,
}

/// Truncation horizon guaranteeing a discounted-tail bias of at most `tol`.
fn mc_horizon(gamma: f64, tol: f64, r_max: f64) -> usize {
    if gamma == 0.0 || r_max == 0.0 {
        return 1;
    }
    let ratio = tol * (1.0 - gamma) / r_max;
    if ratio >= 1.0 {
        return 1;
    }
    (ratio.ln() / gamma.ln()).ceil().max(1.0) as usize
}

/// Discounted reward sums over a fixed horizon, one per point that has a
/// full horizon ahead of it. The horizon is sized so that the truncation
/// bias is at most `tol` given the largest observed reward magnitude.
pub fn monte_carlo_returns(traj: &Trajectory, gamma: f64, tol: f64) -> Result<ReturnsSample> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must be in [0,1), got {gamma}")));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let rewards: Vec<f64> = traj.rewards().collect();
    let n = rewards.len();
    let r_max = rewards.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let horizon = mc_horizon(gamma, tol, r_max);
    if n < horizon {
        return Err(Error::HorizonTooLong { needed: horizon, available: n });
    }

    let discounts: Vec<f64> = (0..horizon).scan(1.0, |g, _| {
        let out = *g;
        *g *= gamma;
        Some(out)
    })
    .collect();

    let transitions = traj.transitions();
    let mut points = Vec::with_capacity(n - horizon + 1);
    for i in 0..=(n - horizon) {
        let ret: f64 = discounts
            .iter()
            .zip(&rewards[i..i + horizon])
            .map(|(g, r)| g * r)
            .sum();
        points.push((transitions[i].x.clone(), ret));
    }
    Ok(ReturnsSample { points, horizon_used: horizon })
}

/// Root-mean-square gap between predicted values and Monte Carlo returns.
pub fn rp_error<V: StateValue>(value: &V, sample: &ReturnsSample) -> Result<f64> {
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut acc = 0.0;
    for (x, ret) in &sample.points {
        let diff = ret - value.value_at(x)?;
        acc += diff * diff;
    }
    Ok((acc / sample.points.len() as f64).sqrt())
}

/// Synthetic benchmark domain parameters: a bounded random walk observed
/// through tile coding, with one constant policy-indicator coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomWalkConfig {
    pub dims: usize,
    pub step: f64,
    pub step_decay: f64,
    pub pull: f64,
    pub jump_prob: f64,
    pub reward_threshold: f64,
    pub reward_gain: f64,
    pub reward_band: f64,
    /// Tiles per encoded dimension; length must be dims + 1.
    pub tiles: Vec<usize>,
    pub n_grids: usize,
}

impl Default for RandomWalkConfig {
    fn default() -> Self {
        let domain = RandomWalkDomain::default();
        Self {
            dims: domain.dims,
            step: domain.step,
            step_decay: domain.step_decay,
            pull: domain.pull,
            jump_prob: domain.jump_prob,
            reward_threshold: domain.reward_threshold,
            reward_gain: domain.reward_gain,
            reward_band: domain.reward_band,
            tiles: vec![6; 6],
            n_grids: 10,
        }
    }
}

impl RandomWalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims < 1 {
            return Err(Error::Config("domain needs at least one dimension".into()));
        }
        if self.tiles.len() != self.dims + 1 {
            return Err(Error::Config(format!(
                "tiles has {} entries, expected dims + 1 = {}",
                self.tiles.len(),
                self.dims + 1
            )));
        }
        if self.tiles.iter().any(|t| *t < 1) {
            return Err(Error::Config("tiles entries must be >= 1".into()));
        }
        if self.n_grids < 1 {
            return Err(Error::Config("n_grids must be >= 1".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("step must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.pull) || !(0.0..=1.0).contains(&self.jump_prob) {
            return Err(Error::Config("pull and jump_prob must be in [0,1]".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> RandomWalkDomain {
        RandomWalkDomain {
            dims: self.dims,
            step: self.step,
            step_decay: self.step_decay,
            pull: self.pull,
            jump_prob: self.jump_prob,
            reward_threshold: self.reward_threshold,
            reward_gain: self.reward_gain,
            reward_band: self.reward_band,
        }
    }

    pub fn coder(&self, seed: u64) -> Result<TileCoder> {
        TileCoder::new(
            vec![(0.0, 1.0); self.dims + 1],
            self.tiles.clone(),
            self.n_grids,
            seed,
        )
    }
}

fn default_patience() -> usize {
    5
}

fn default_d_grid() -> Vec<usize> {
    vec![5, 10, 20, 40, 80, 160]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingKind {
    #[default]
    Fixed,
    Validation,
}

/// Which method(s) to run per trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodConfig {
    Cbebf {
        d: usize,
        m_max: usize,
        #[serde(default)]
        stopping: StoppingKind,
        #[serde(default = "default_patience")]
        patience: usize,
    },
    Clstd {
        #[serde(default = "default_d_grid")]
        d_grid: Vec<usize>,
    },
    /// Both methods on the same sampled data.
    Both {
        d: usize,
        m_max: usize,
        #[serde(default = "default_d_grid")]
        d_grid: Vec<usize>,
    },
}

impl MethodConfig {
    fn validate(&self) -> Result<()> {
        let check_d = |d: usize| {
            if d < 1 {
                Err(Error::Config("projection size must be >= 1".into()))
            } else {
                Ok(())
            }
        };
        match self {
            MethodConfig::Cbebf { d, patience, .. } => {
                check_d(*d)?;
                if *patience < 1 {
                    return Err(Error::Config("patience must be >= 1".into()));
                }
            }
            MethodConfig::Clstd { d_grid } => {
                if d_grid.is_empty() {
                    return Err(Error::Config("d_grid must be non-empty".into()));
                }
                for &d in d_grid {
                    check_d(d)?;
                }
            }
            MethodConfig::Both { d, d_grid, .. } => {
                check_d(*d)?;
                if d_grid.is_empty() {
                    return Err(Error::Config("d_grid must be non-empty".into()));
                }
                for &d in d_grid {
                    check_d(d)?;
                }
            }
        }
        Ok(())
    }
}

/// Full experiment description; loadable from TOML, flags may override.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: RandomWalkConfig,
    pub method: MethodConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub n_trials: usize,
    pub gamma: f64,
    pub master_seed: u64,
    pub output: PathBuf,
    /// When false (the default) wall_time_ms is written as 0 so repeated
    /// runs with one seed produce byte-identical CSV files.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: RandomWalkConfig::default(),
            method: MethodConfig::Cbebf {
                d: 20,
                m_max: 300,
                stopping: StoppingKind::Fixed,
                patience: default_patience(),
            },
            n_train: 1500,
            n_test: 5000,
            n_trials: 10,
            gamma: 0.9,
            master_seed: 0,
            output: PathBuf::from("results.csv"),
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.method.validate()?;
        if self.n_train < 1 || self.n_test < 1 || self.n_trials < 1 {
            return Err(Error::Config("n_train, n_test and n_trials must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        Ok(())
    }

    fn mc_tolerance(&self) -> f64 {
        1e-3 * self.domain.domain().r_max() / (1.0 - self.gamma)
    }
}

/// One emitted measurement: a (trial, method, setting) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub method: String,
    pub d: usize,
    pub n: usize,
    pub num_bebfs: usize,
    pub rp_error: f64,
    pub wall_time_ms: f64,
}

/// A sub-operation that failed; the run keeps going.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<TrialFailure>,
}

struct TrialData {
    train: Trajectory,
    returns: ReturnsSample,
}

fn prepare_trial(cfg: &ExperimentConfig, trial_seed: u64) -> Result<TrialData> {
    let coder = cfg.domain.coder(derive_seed(trial_seed, 0))?;
    let domain = cfg.domain.domain();
    let tol = cfg.mc_tolerance();
    let horizon = mc_horizon(cfg.gamma, tol, domain.r_max());

    let train = domain.sample_trajectory(&coder, cfg.n_train, derive_seed(trial_seed, 1))?;
    let test = domain.sample_trajectory(
        &coder,
        cfg.n_test + horizon,
        derive_seed(trial_seed, 2),
    )?;
    let mut returns = monte_carlo_returns(&test, cfg.gamma, tol)?;
    returns.points.truncate(cfg.n_test);
    Ok(TrialData { train, returns })
}

#[allow(clippy::too_many_arguments)]
fn run_cbebf_arm(
    cfg: &ExperimentConfig,
    data: &TrialData,
    trial: usize,
    trial_seed: u64,
    d: usize,
    m_max: usize,
    stopping: StoppingKind,
    patience: usize,
) -> Result<Vec<ResultRow>> {
    let mut fit_cfg = CbebfConfig::constant(m_max, d, cfg.gamma, derive_seed(trial_seed, 3));
    if stopping == StoppingKind::Validation {
        fit_cfg = fit_cfg.with_validation_stopping(patience);
    }
    let (_, report) = cbebf_fit(&data.train, &fit_cfg, Some(&data.returns.points))?;
    let rows = report
        .per_iteration
        .iter()
        .enumerate()
        .map(|(i, record)| ResultRow {
            trial,
            method: "cbebf".into(),
            d,
            n: cfg.n_train,
            num_bebfs: i + 1,
            rp_error: record.validation_rp_error.expect("validation data supplied"),
            wall_time_ms: if cfg.record_timing { record.wall_time_ms } else { 0.0 },
        })
        .collect();
    Ok(rows)
}

fn run_clstd_arm(
    cfg: &ExperimentConfig,
    data: &TrialData,
    trial: usize,
    trial_seed: u64,
    d_grid: &[usize],
    failures: &mut Vec<TrialFailure>,
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &d in d_grid {
        let start = Instant::now();
        let attempt = clstd_fit(&data.train, d, cfg.gamma, derive_seed(derive_seed(trial_seed, 4), d as u64))
            .and_then(|(phi, sol)| rp_error(&ClstdValue::new(phi, sol), &data.returns));
        match attempt {
            Ok(rp) => rows.push(ResultRow {
                trial,
                method: "clstd".into(),
                d,
                n: cfg.n_train,
                num_bebfs: 0,
                rp_error: rp,
                wall_time_ms: if cfg.record_timing {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
            }),
            Err(e) => failures.push(TrialFailure {
                trial,
                method: format!("clstd[d={d}]"),
                message: e.to_string(),
            }),
        }
    }
    rows
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> (Vec<ResultRow>, Vec<TrialFailure>) {
    let trial_seed = derive_seed(cfg.master_seed, trial as u64);
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    let data = match prepare_trial(cfg, trial_seed) {
        Ok(d) => d,
        Err(e) => {
            failures.push(TrialFailure {
                trial,
                method: "setup".into(),
                message: e.to_string(),
            });
            return (rows, failures);
        }
    };

    let cbebf = |rows: &mut Vec<ResultRow>,
                     failures: &mut Vec<TrialFailure>,
                     d: usize,
                     m_max: usize,
                     stopping: StoppingKind,
                     patience: usize| {
        match run_cbebf_arm(cfg, &data, trial, trial_seed, d, m_max, stopping, patience) {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push(TrialFailure {
                trial,
                method: "cbebf".into(),
                message: e.to_string(),
            }),
        }
    };

    match &cfg.method {
        MethodConfig::Cbebf { d, m_max, stopping, patience } => {
            cbebf(&mut rows, &mut failures, *d, *m_max, *stopping, *patience);
        }
        MethodConfig::Clstd { d_grid } => {
            let mut r = run_clstd_arm(cfg, &data, trial, trial_seed, d_grid, &mut failures);
            rows.append(&mut r);
        }
        MethodConfig::Both { d, m_max, d_grid } => {
            cbebf(&mut rows, &mut failures, *d, *m_max, StoppingKind::Fixed, default_patience());
            let mut r = run_clstd_arm(cfg, &data, trial, trial_seed, d_grid, &mut failures);
            rows.append(&mut r);
        }
    }

    (rows, failures)
}

/// Run every trial (in parallel; trials own derived seed streams), sort the
/// rows deterministically, and write the CSV file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;

    let per_trial: Vec<(Vec<ResultRow>, Vec<TrialFailure>)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, trial))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (mut r, mut f) in per_trial {
        rows.append(&mut r);
        failures.append(&mut f);
    }
    rows.sort_by(|a, b| {
        (&a.method, a.d, a.num_bebfs, a.trial).cmp(&(&b.method, b.d, b.num_bebfs, b.trial))
    });

    write_csv(&rows, &cfg.output)?;
    Ok(ExperimentOutcome { rows, failures })
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Mean RP error per iteration count, over all trials, for one method/d.
/// Keys iterate in sorted order so the fold is order-independent.
pub fn mean_curve_by_iteration(rows: &[ResultRow], method: &str, d: usize) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.method == method && r.d == d) {
        let cell = acc.entry(row.num_bebfs).or_insert((0.0, 0));
        cell.0 += row.rp_error;
        cell.1 += 1;
    }
    acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()
}

/// Mean and standard deviation of the mean. Inputs are consumed in the
/// caller's (deterministic) order; the fold is commutative either way.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-trial best (minimum) RP error across every setting of a method.
pub fn best_rp_per_trial(rows: &[ResultRow], method: &str) -> BTreeMap<usize, f64> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.method == method) {
        best.entry(row.trial)
            .and_modify(|b| *b = b.min(row.rp_error))
            .or_insert(row.rp_error);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bebf::ValueEstimate;
    use crate::mdp::{FiniteMdp, Transition};
    use crate::sparse_linalg::{DenseMatrix, SparseVec};

    fn constant_reward_trajectory(n: usize, reward: f64) -> Trajectory {
        let transitions = (0..n)
            .map(|_| Transition {
                x: SparseVec::one_hot(2, 0).unwrap(),
                reward,
                x_next: SparseVec::one_hot(2, 1).unwrap(),
            })
            .collect();
        Trajectory::new(2, transitions).unwrap()
    }

    #[test]
    fn mc_returns_geometric_series() {
        let traj = constant_reward_trajectory(200, 1.0);
        let sample = monte_carlo_returns(&traj, 0.5, 1e-6).unwrap();
        for (_, u) in &sample.points {
            assert!((u - 2.0).abs() <= 1e-6, "{u}");
        }
    }

    #[test]
    fn mc_returns_zero_rewards() {
        let traj = constant_reward_trajectory(50, 0.0);
        let sample = monte_carlo_returns(&traj, 0.9, 1e-3).unwrap();
        assert_eq!(sample.horizon_used, 1);
        assert!(sample.points.iter().all(|(_, u)| *u == 0.0));
    }

    #[test]
    fn mc_returns_myopic_gamma() {
        let m = FiniteMdp::random_chain(4, 0.9, 1).unwrap();
        let traj = m.sample_trajectory(30, 2).unwrap();
        let sample = monte_carlo_returns(&traj, 0.0, 1e-3).unwrap();
        assert_eq!(sample.horizon_used, 1);
        for ((_, u), t) in sample.points.iter().zip(traj.transitions()) {
            assert_eq!(*u, t.reward);
        }
    }

    #[test]
    fn mc_returns_rejects_short_trajectory() {
        let traj = constant_reward_trajectory(3, 1.0);
        assert!(matches!(
            monte_carlo_returns(&traj, 0.9, 1e-6),
            Err(Error::HorizonTooLong { .. })
        ));
    }

    #[test]
    fn mc_truncation_bias_within_tolerance() {
        // all-R_max rewards are the worst case for the dropped tail
        for (gamma, tol, r_max) in [(0.9, 1e-3, 1.0), (0.5, 1e-6, 2.0), (0.99, 1e-2, 0.5)] {
            let horizon = mc_horizon(gamma, tol, r_max);
            let traj = constant_reward_trajectory(horizon + 10, r_max);
            let sample = monte_carlo_returns(&traj, gamma, tol).unwrap();
            let full = r_max / (1.0 - gamma);
            for (_, u) in &sample.points {
                assert!((full - u).abs() <= tol, "gap {} > tol {tol}", full - u);
            }
        }
    }

    #[test]
    fn rp_error_examples() {
        let x0 = SparseVec::one_hot(2, 0).unwrap();
        let x1 = SparseVec::one_hot(2, 1).unwrap();

        // perfect prediction
        let v = ValueEstimate::from_weights(vec![1.0, 3.0]).unwrap();
        let sample = ReturnsSample {
            points: vec![(x0.clone(), 1.0), (x1.clone(), 3.0)],
            horizon_used: 1,
        };
        assert_eq!(rp_error(&v, &sample).unwrap(), 0.0);

        // constant offset
        let zero = ValueEstimate::zero(2);
        let sample2 = ReturnsSample {
            points: vec![(x0.clone(), 2.0), (x1.clone(), 2.0)],
            horizon_used: 1,
        };
        assert_eq!(rp_error(&zero, &sample2).unwrap(), 2.0);

        // U = [1,3] vs V = [2,2] -> sqrt((1+1)/2) = 1
        let two = ValueEstimate::from_weights(vec![2.0, 2.0]).unwrap();
        let sample3 = ReturnsSample {
            points: vec![(x0, 1.0), (x1, 3.0)],
            horizon_used: 1,
        };
        assert_eq!(rp_error(&two, &sample3).unwrap(), 1.0);
    }

    #[test]
    fn rp_error_empty_sample() {
        let v = ValueEstimate::zero(2);
        let empty = ReturnsSample { points: vec![], horizon_used: 1 };
        assert!(matches!(rp_error(&v, &empty), Err(Error::EmptySample)));
    }

    #[test]
    fn csv_round_trip_exact() {
        let rows = vec![
            ResultRow {
                trial: 0,
                method: "cbebf".into(),
                d: 20,
                n: 1500,
                num_bebfs: 17,
                rp_error: 1.2345678901234567,
                wall_time_ms: 0.0,
            },
            ResultRow {
                trial: 3,
                method: "clstd".into(),
                d: 160,
                n: 500,
                num_bebfs: 0,
                rp_error: 0.1 + 0.2,
                wall_time_ms: 12.5,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&rows, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            domain: RandomWalkConfig {
                dims: 2,
                step: 0.3,
                tiles: vec![3, 3, 3],
                n_grids: 3,
                ..RandomWalkConfig::default()
            },
            method: MethodConfig::Both { d: 6, m_max: 8, d_grid: vec![3, 6] },
            n_train: 120,
            n_test: 80,
            n_trials: 2,
            gamma: 0.9,
            master_seed: 11,
            output: dir.join("tiny.csv"),
            record_timing: false,
        }
    }

    #[test]
    fn run_experiment_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let first = run_experiment(&cfg).unwrap();
        let bytes_first = std::fs::read(&cfg.output).unwrap();
        let second = run_experiment(&cfg).unwrap();
        let bytes_second = std::fs::read(&cfg.output).unwrap();

        assert!(first.failures.is_empty(), "{:?}", first.failures);
        assert_eq!(first.rows, second.rows);
        assert_eq!(bytes_first, bytes_second);

        // both methods emitted rows for both trials
        assert_eq!(first.rows.iter().filter(|r| r.method == "cbebf").count(), 2 * 8);
        assert_eq!(first.rows.iter().filter(|r| r.method == "clstd").count(), 2 * 2);
        assert!(first.rows.iter().all(|r| r.rp_error >= 0.0));
        assert!(first.rows.iter().all(|r| r.wall_time_ms == 0.0));
    }

    #[test]
    fn curve_and_best_aggregations() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let outcome = run_experiment(&cfg).unwrap();
        let curve = mean_curve_by_iteration(&outcome.rows, "cbebf", 6);
        assert_eq!(curve.len(), 8);
        assert!(curve.windows(2).all(|w| w[0].0 < w[1].0));

        let best = best_rp_per_trial(&outcome.rows, "clstd");
        assert_eq!(best.len(), 2);
        for (trial, b) in &best {
            for row in outcome.rows.iter().filter(|r| r.method == "clstd" && r.trial == *trial) {
                assert!(*b <= row.rp_error);
            }
        }
    }

    #[test]
    fn mean_and_sem_basics() {
        let (m, s) = mean_and_sem(&[2.0, 4.0, 6.0]);
        assert!((m - 4.0).abs() < 1e-15);
        // sample std 2, sem 2/sqrt(3)
        assert!((s - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_sem(&[5.0]), (5.0, 0.0));
        assert!(mean_and_sem(&[]).0.is_nan());
    }

    #[test]
    fn failures_are_recorded_and_run_continues() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        // second grid entry exceeds the feature dimension, so that arm fails
        let dim = cfg.domain.coder(0).unwrap().output_dim();
        cfg.method = MethodConfig::Both { d: 6, m_max: 5, d_grid: vec![6, dim + 1] };
        let outcome = run_experiment(&cfg).unwrap();
        assert_eq!(outcome.failures.len(), 2); // one per trial
        assert!(outcome.failures.iter().all(|f| f.method.contains("clstd")));
        // cbebf rows and the valid clstd setting are still present
        assert_eq!(outcome.rows.iter().filter(|r| r.method == "cbebf").count(), 2 * 5);
        assert_eq!(outcome.rows.iter().filter(|r| r.method == "clstd").count(), 2);
    }

    #[test]
    fn validation_stopping_through_harness() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.method = MethodConfig::Cbebf {
            d: 6,
            m_max: 40,
            stopping: StoppingKind::Validation,
            patience: 3,
        };
        let outcome = run_experiment(&cfg).unwrap();
        assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
        for trial in 0..cfg.n_trials {
            let rows = outcome
                .rows
                .iter()
                .filter(|r| r.method == "cbebf" && r.trial == trial)
                .count();
            assert!(rows > 0 && rows <= 40);
        }
    }

    #[test]
    fn config_parses_from_toml_with_defaults() {
        let text = r#"
            n_train = 700
            master_seed = 5

            [method]
            kind = "clstd"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.n_train, 700);
        assert_eq!(cfg.n_test, 5000);
        assert_eq!(cfg.master_seed, 5);
        match &cfg.method {
            MethodConfig::Clstd { d_grid } => assert_eq!(d_grid, &vec![5, 10, 20, 40, 80, 160]),
            other => panic!("unexpected method {other:?}"),
        }
        assert!(ExperimentConfig::from_toml_str("n_train = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("nonsense = 1").is_err());
    }

    #[test]
    fn monte_carlo_rejects_empty() {
        let m = FiniteMdp::new(
            DenseMatrix::new(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap(),
            vec![1.0, 1.0],
            0.9,
        )
        .unwrap();
        let traj = m.sample_trajectory(0, 1).unwrap();
        assert!(monte_carlo_returns(&traj, 0.9, 1e-3).is_err());
    }
}

//! Least-squares temporal difference baselines: LSTD on randomly compressed
//! features, and exact tabular LSTD used as a cross-check oracle.

use nalgebra::{DMatrix, DVector};

use crate::bebf::StateValue;
use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::projection::ProjectionMatrix;
use crate::sparse_linalg::{DenseMatrix, SparseVec};

const RIDGE_SCALE: f64 = 1e-8;

/// Fitted LSTD coefficients and the ridge that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LstdSolution {
    pub weights: Vec<f64>,
    pub ridge: f64,
}

/// Solve the LSTD fixed-point system on already-compressed features:
/// (A + ridge I) w = b with A = Z^T (Z - gamma Z'), b = Z^T r.
///
/// A tiny ridge proportional to trace(A)/d is always added; it guards
/// against singular systems without visibly biasing the solution.
pub fn lstd_compressed(
    inputs: &DenseMatrix,
    next_inputs: &DenseMatrix,
    rewards: &[f64],
    gamma: f64,
) -> Result<LstdSolution> {
    let n = inputs.rows();
    let d = inputs.cols();
    if next_inputs.rows() != n || next_inputs.cols() != d {
        return Err(Error::dim(n * d, next_inputs.rows() * next_inputs.cols()));
    }
    if rewards.len() != n {
        return Err(Error::dim(n, rewards.len()));
    }

    let z = DMatrix::from_row_slice(n, d, inputs.data());
    let z_next = DMatrix::from_row_slice(n, d, next_inputs.data());
    let mut a = z.transpose() * (&z - gamma * z_next);
    let b = z.transpose() * DVector::from_column_slice(rewards);

    let ridge = RIDGE_SCALE * a.trace() / d as f64;
    for i in 0..d {
        a[(i, i)] += ridge;
    }
    let w = a.lu().solve(&b).ok_or(Error::SingularSystem("lstd_compressed"))?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("lstd_compressed produced non-finite weights"));
    }
    Ok(LstdSolution { weights: w.iter().copied().collect(), ridge })
}

/// LSTD with random projections: compress every observation with a seeded
/// projection, then solve LSTD in the d-dimensional space.
pub fn clstd_fit(
    traj: &Trajectory,
    d: usize,
    gamma: f64,
    seed: u64,
) -> Result<(ProjectionMatrix, LstdSolution)> {
    if traj.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = traj.len();
    let phi = ProjectionMatrix::new(traj.dim(), d, seed)?;
    let mut z = vec![0.0; n * d];
    let mut z_next = vec![0.0; n * d];
    for (row, t) in traj.transitions().iter().enumerate() {
        phi.project_into(&t.x, &mut z[row * d..(row + 1) * d])?;
        phi.project_into(&t.x_next, &mut z_next[row * d..(row + 1) * d])?;
    }
    let rewards: Vec<f64> = traj.rewards().collect();
    let solution = lstd_compressed(
        &DenseMatrix::new(n, d, z)?,
        &DenseMatrix::new(n, d, z_next)?,
        &rewards,
        gamma,
    )?;
    Ok((phi, solution))
}

/// A compressed value function: V(x) = (Phi^T x)^T w.
#[derive(Debug, Clone)]
pub struct ClstdValue {
    phi: ProjectionMatrix,
    solution: LstdSolution,
}

impl ClstdValue {
    pub fn new(phi: ProjectionMatrix, solution: LstdSolution) -> Self {
        Self { phi, solution }
    }

    pub fn solution(&self) -> &LstdSolution {
        &self.solution
    }
}

impl StateValue for ClstdValue {
    fn value_at(&self, x: &SparseVec) -> Result<f64> {
        let z = self.phi.project(x)?;
        Ok(z.iter().zip(&self.solution.weights).map(|(a, b)| a * b).sum())
    }
}

fn one_hot_state(x: &SparseVec) -> Result<usize> {
    let mut it = x.iter();
    match (it.next(), it.next()) {
        (Some((idx, v)), None) if (v - 1.0).abs() < 1e-12 => Ok(idx),
        _ => Err(Error::NotOneHot),
    }
}

/// LSTD in the full feature space for one-hot trajectories.
///
/// Equals the model-based answer (I - gamma P_hat)^-1 R_hat on the empirical
/// chain restricted to visited states; states never visited as a source get
/// weight zero. Falls back to a ridge when the direct solve is singular.
pub fn tabular_lstd(traj: &Trajectory, gamma: f64) -> Result<LstdSolution> {
    if traj.is_empty() {
        return Err(Error::EmptySample);
    }
    let big_dim = traj.dim();

    let mut index_of = vec![usize::MAX; big_dim];
    let mut visited = Vec::new();
    for t in traj.transitions() {
        let s = one_hot_state(&t.x)?;
        if index_of[s] == usize::MAX {
            index_of[s] = visited.len();
            visited.push(s);
        }
    }
    let v = visited.len();

    let mut a = DMatrix::<f64>::zeros(v, v);
    let mut b = DVector::<f64>::zeros(v);
    for t in traj.transitions() {
        let i = index_of[one_hot_state(&t.x)?];
        a[(i, i)] += 1.0;
        let next = one_hot_state(&t.x_next)?;
        if index_of[next] != usize::MAX {
            a[(i, index_of[next])] -= gamma;
        }
        b[i] += t.reward;
    }

    let mut ridge = 0.0;
    let mut solution = a.clone().lu().solve(&b);
    if solution.as_ref().is_none_or(|s| s.iter().any(|x| !x.is_finite())) {
        ridge = RIDGE_SCALE * a.trace() / v as f64;
        for i in 0..v {
            a[(i, i)] += ridge;
        }
        solution = a.lu().solve(&b);
    }
    let values = solution.ok_or(Error::SingularSystem("tabular_lstd"))?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem("tabular_lstd produced non-finite weights"));
    }

    let mut weights = vec![0.0; big_dim];
    for (i, &s) in visited.iter().enumerate() {
        weights[s] = values[i];
    }
    Ok(LstdSolution { weights, ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{FiniteMdp, Transition};
    use crate::sparse_linalg::weighted_l2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rewards_give_zero_value() {
        let m = FiniteMdp::new(
            DenseMatrix::new(2, 2, vec![0.5, 0.5, 0.3, 0.7]).unwrap(),
            vec![0.0, 0.0],
            0.9,
        )
        .unwrap();
        let traj = m.sample_trajectory(500, 1).unwrap();
        let (phi, sol) = clstd_fit(&traj, 2, 0.9, 7).unwrap();
        assert!(sol.weights.iter().all(|w| w.abs() < 1e-9));
        let value = ClstdValue::new(phi, sol);
        let x = SparseVec::one_hot(2, 0).unwrap();
        assert!(value.value_at(&x).unwrap().abs() < 1e-9);
    }

    #[test]
    fn clstd_deterministic() {
        let m = FiniteMdp::random_chain(6, 0.9, 2).unwrap();
        let traj = m.sample_trajectory(300, 3).unwrap();
        let (_, a) = clstd_fit(&traj, 4, 0.9, 11).unwrap();
        let (_, b) = clstd_fit(&traj, 4, 0.9, 11).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn tabular_two_cycle_matches_exact_value() {
        let m = FiniteMdp::new(
            DenseMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
            vec![1.0, 0.0],
            0.5,
        )
        .unwrap();
        let traj = m.sample_trajectory(10_000, 4).unwrap();
        let sol = tabular_lstd(&traj, 0.5).unwrap();
        assert!((sol.weights[0] - 4.0 / 3.0).abs() < 1e-9);
        assert!((sol.weights[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn tabular_single_transition() {
        let x = SparseVec::one_hot(3, 0).unwrap();
        let x_next = SparseVec::one_hot(3, 1).unwrap();
        let traj = Trajectory::new(3, vec![Transition { x, reward: 2.0, x_next }]).unwrap();
        let sol = tabular_lstd(&traj, 0.9).unwrap();
        // next state never visited as a source, so its value is pinned at 0
        assert!((sol.weights[0] - 2.0).abs() < 1e-9);
        assert_eq!(sol.weights[1], 0.0);
        assert_eq!(sol.weights[2], 0.0);
    }

    #[test]
    fn tabular_rejects_non_one_hot() {
        let x = SparseVec::new(3, vec![(0, 0.5), (1, 0.5)]).unwrap();
        let traj = Trajectory::new(
            3,
            vec![Transition { x: x.clone(), reward: 0.0, x_next: x }],
        )
        .unwrap();
        assert!(matches!(tabular_lstd(&traj, 0.9), Err(Error::NotOneHot)));
    }

    #[test]
    fn tabular_solves_empirical_fixed_point() {
        // per-state average TD error of the fitted value is ~0 on the
        // training sample
        let m = FiniteMdp::random_chain(8, 0.9, 6).unwrap();
        let traj = m.sample_trajectory(5_000, 7).unwrap();
        let sol = tabular_lstd(&traj, 0.9).unwrap();
        let mut sums = [0.0; 8];
        let mut counts = [0usize; 8];
        for t in traj.transitions() {
            let s = one_hot_state(&t.x).unwrap();
            let next = one_hot_state(&t.x_next).unwrap();
            sums[s] += t.reward + 0.9 * sol.weights[next] - sol.weights[s];
            counts[s] += 1;
        }
        for s in 0..8 {
            if counts[s] > 0 {
                assert!((sums[s] / counts[s] as f64).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn clstd_consistent_and_matches_tabular_at_full_size() {
        let n_states = 20;
        let m = FiniteMdp::random_chain(n_states, 0.9, 8).unwrap();
        let traj = m.sample_trajectory(100_000, 9).unwrap();
        let rho = m.stationary_distribution().unwrap();
        let exact = m.exact_value().unwrap();
        let exact_norm = weighted_l2(&exact, &rho).unwrap();

        let (phi, sol) = clstd_fit(&traj, n_states, 0.9, 10).unwrap();
        let value = ClstdValue::new(phi, sol);
        let clstd_values: Vec<f64> = (0..n_states)
            .map(|s| value.value_at(&SparseVec::one_hot(n_states, s).unwrap()).unwrap())
            .collect();

        let diff: Vec<f64> = exact.iter().zip(&clstd_values).map(|(a, b)| a - b).collect();
        let err = weighted_l2(&diff, &rho).unwrap();
        assert!(err <= 0.05 * exact_norm, "clstd err {err}, norm {exact_norm}");

        let tab = tabular_lstd(&traj, 0.9).unwrap();
        let diff_tab: Vec<f64> = tab
            .weights
            .iter()
            .zip(&clstd_values)
            .map(|(a, b)| a - b)
            .collect();
        let gap = weighted_l2(&diff_tab, &rho).unwrap();
        assert!(gap <= 1e-3, "clstd vs tabular gap {gap}");
    }

    #[test]
    fn compressed_solution_invariant_to_orthogonal_rotation() {
        // replacing Phi by Phi Q rotates the inputs z -> Q^T z; fitted values
        // depend only on the column space, so predictions must not move
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 60;
        let d = 6;
        let make = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let z = make(&mut rng, n * d);
        let z_next = make(&mut rng, n * d);
        let rewards = make(&mut rng, n);

        let gaussian = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let q = gaussian.qr().q();

        // row-major layout of Z Q
        let rotate_rows = |data: &[f64]| -> Vec<f64> {
            let m = DMatrix::from_row_slice(n, d, data);
            let rotated = m * &q;
            let mut out = Vec::with_capacity(n * d);
            for i in 0..n {
                for j in 0..d {
                    out.push(rotated[(i, j)]);
                }
            }
            out
        };

        let base = lstd_compressed(
            &DenseMatrix::new(n, d, z.clone()).unwrap(),
            &DenseMatrix::new(n, d, z_next.clone()).unwrap(),
            &rewards,
            0.9,
        )
        .unwrap();
        let rotated = lstd_compressed(
            &DenseMatrix::new(n, d, rotate_rows(&z)).unwrap(),
            &DenseMatrix::new(n, d, rotate_rows(&z_next)).unwrap(),
            &rewards,
            0.9,
        )
        .unwrap();

        for i in 0..n {
            let zi = &z[i * d..(i + 1) * d];
            let vi: f64 = zi.iter().zip(&base.weights).map(|(a, b)| a * b).sum();
            let zi_rot: Vec<f64> = (0..d)
                .map(|j| (0..d).map(|k| zi[k] * q[(k, j)]).sum())
                .collect();
            let vi_rot: f64 = zi_rot.iter().zip(&rotated.weights).map(|(a, b)| a * b).sum();
            assert!((vi - vi_rot).abs() < 1e-9, "{vi} vs {vi_rot}");
        }
    }
}

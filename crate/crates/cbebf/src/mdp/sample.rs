//! Transition samples from fixed-policy chains, plus the synthetic
//! continuous benchmark domain.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, TileCoder};
use crate::sparse_linalg::SparseVec;

/// One observed step: features, reward, next features.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x: SparseVec,
    pub reward: f64,
    pub x_next: SparseVec,
}

/// An ordered sample of transitions from one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(dim: usize, transitions: Vec<Transition>) -> Result<Self> {
        for t in &transitions {
            if t.x.dim() != dim || t.x_next.dim() != dim {
                return Err(Error::dim(dim, t.x.dim().min(t.x_next.dim())));
            }
            if !t.reward.is_finite() {
                return Err(Error::NonFinite { context: "trajectory reward" });
            }
        }
        Ok(Self { dim, transitions })
    }

    /// Feature dimension shared by every observation.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.reward)
    }

    /// Sorted distinct feature indices appearing in any observation.
    pub fn feature_indices(&self) -> Vec<usize> {
        let mut set = std::collections::BTreeSet::new();
        for t in &self.transitions {
            set.extend(t.x.iter().map(|(i, _)| i));
            set.extend(t.x_next.iter().map(|(i, _)| i));
        }
        set.into_iter().collect()
    }
}

fn categorical(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}

impl FiniteMdp {
    /// Roll the chain for n steps with one-hot features, starting from the
    /// stationary distribution. Deterministic given the seed.
    pub fn sample_trajectory(&self, n: usize, seed: u64) -> Result<Trajectory> {
        let s = self.n_states();
        if n == 0 {
            return Trajectory::new(s, Vec::new());
        }
        let rho = self.stationary_distribution()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = categorical(&rho, rng.gen::<f64>());
        let mut transitions = Vec::with_capacity(n);
        for _ in 0..n {
            let next = categorical(self.transition().row(state), rng.gen::<f64>());
            transitions.push(Transition {
                x: SparseVec::one_hot(s, state)?,
                reward: self.reward()[state],
                x_next: SparseVec::one_hot(s, next)?,
            });
            state = next;
        }
        Trajectory::new(s, transitions)
    }
}

/// A mean-reverting bounded walk on [0,1]^dims observed through a tile
/// coder; the encoder sees one extra constant coordinate, mirroring a
/// policy indicator feature.
///
/// Each coordinate is pulled toward 0.5 at rate `pull` and kicked by a
/// uniform step whose width shrinks geometrically across coordinates
/// (`step * step_decay^j`), so most value structure lives along the first
/// coordinates at a scale the offset grids resolve, the occupied cell set
/// stays small, and the chain decorrelates in a few steps.
/// With probability `jump_prob` a step instead resamples the state
/// uniformly, an exploration kick that scatters a thin tail of rarely
/// visited cells across the box.
/// Reward is a unit coin: 1 with probability
/// clamp(gain * (mean(x) - threshold), 0, 1) inside the central band
/// |x_j - 0.5| <= band, and 0 outside it. The expected reward is zero over
/// roughly half the visited band and climbs steeply inside it; the coin
/// itself carries irreducible TD noise, like the near-binary rewards of
/// clinical stimulation domains. An expected reward with a large mean
/// everywhere would put most of the value function's energy into the
/// all-ones feature direction, which no sparse-basis projection can carry.
#[derive(Debug, Clone)]
pub struct RandomWalkDomain {
    pub dims: usize,
    pub step: f64,
    pub step_decay: f64,
    pub pull: f64,
    pub jump_prob: f64,
    pub reward_threshold: f64,
    pub reward_gain: f64,
    pub reward_band: f64,
}

impl Default for RandomWalkDomain {
    fn default() -> Self {
        Self {
            dims: 5,
            step: 0.2,
            step_decay: 0.7,
            pull: 0.5,
            jump_prob: 0.0,
            reward_threshold: 0.5,
            reward_gain: 14.0,
            reward_band: 0.3,
        }
    }
}

impl RandomWalkDomain {
    /// Rewards are clamped to [0, 1].
    pub fn r_max(&self) -> f64 {
        1.0
    }

    /// Number of coordinates the tile coder must accept.
    pub fn encoded_dims(&self) -> usize {
        self.dims + 1
    }

    fn reward(&self, state: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        if state.iter().any(|x| (x - 0.5).abs() > self.reward_band) {
            return 0.0;
        }
        let mean = state.iter().sum::<f64>() / state.len() as f64;
        let p = (self.reward_gain * (mean - self.reward_threshold)).clamp(0.0, 1.0);
        if rng.gen::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }

    fn advance(&self, state: &mut [f64], rng: &mut ChaCha8Rng) {
        if rng.gen::<f64>() < self.jump_prob {
            for coord in state.iter_mut() {
                *coord = rng.gen::<f64>();
            }
            return;
        }
        let mut width = self.step;
        for coord in state.iter_mut() {
            let kicked = *coord + self.pull * (0.5 - *coord) + rng.gen_range(-width..=width);
            *coord = kicked.clamp(0.0, 1.0);
            width *= self.step_decay;
        }
    }

    /// Roll the walk for n steps, encoding observations with `coder`.
    pub fn sample_trajectory(&self, coder: &TileCoder, n: usize, seed: u64) -> Result<Trajectory> {
        if coder.n_dims() != self.encoded_dims() {
            return Err(Error::dim(self.encoded_dims(), coder.n_dims()));
        }
        let dim = coder.output_dim();
        if n == 0 {
            return Trajectory::new(dim, Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state: Vec<f64> = (0..self.dims).map(|_| rng.gen::<f64>()).collect();
        let mut point = vec![0.5; self.encoded_dims()];

        point[..self.dims].copy_from_slice(&state);
        let mut x = coder.encode(&point)?;
        let mut transitions = Vec::with_capacity(n);
        for _ in 0..n {
            let reward = self.reward(&state, &mut rng);
            self.advance(&mut state, &mut rng);
            point[..self.dims].copy_from_slice(&state);
            let x_next = coder.encode(&point)?;
            transitions.push(Transition { x: x.clone(), reward, x_next: x_next.clone() });
            x = x_next;
        }
        Trajectory::new(dim, transitions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_linalg::DenseMatrix;

    #[test]
    fn empty_trajectory() {
        let m = FiniteMdp::random_chain(4, 0.9, 1).unwrap();
        let t = m.sample_trajectory(0, 7).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dim(), 4);
    }

    #[test]
    fn one_hot_features() {
        let m = FiniteMdp::random_chain(6, 0.9, 2).unwrap();
        let t = m.sample_trajectory(500, 9).unwrap();
        assert_eq!(t.len(), 500);
        for tr in t.transitions() {
            assert_eq!(tr.x.nnz(), 1);
            assert_eq!(tr.x.iter().next().unwrap().1, 1.0);
        }
    }

    #[test]
    fn consecutive_transitions_chain() {
        let m = FiniteMdp::random_chain(5, 0.9, 3).unwrap();
        let t = m.sample_trajectory(200, 11).unwrap();
        for pair in t.transitions().windows(2) {
            assert_eq!(pair[0].x_next, pair[1].x);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = FiniteMdp::random_chain(5, 0.9, 3).unwrap();
        assert_eq!(m.sample_trajectory(100, 11).unwrap(), m.sample_trajectory(100, 11).unwrap());
        assert_ne!(m.sample_trajectory(100, 11).unwrap(), m.sample_trajectory(100, 12).unwrap());
    }

    #[test]
    fn empirical_frequencies_approach_stationary() {
        let m = FiniteMdp::new(
            DenseMatrix::new(2, 2, vec![0.9, 0.1, 0.5, 0.5]).unwrap(),
            vec![0.0, 0.0],
            0.9,
        )
        .unwrap();
        let rho = m.stationary_distribution().unwrap();
        let n = 100_000;
        let t = m.sample_trajectory(n, 123).unwrap();
        let mut counts = [0usize; 2];
        for tr in t.transitions() {
            counts[tr.x.iter().next().unwrap().0] += 1;
        }
        let l1: f64 = counts
            .iter()
            .zip(&rho)
            .map(|(c, r)| (*c as f64 / n as f64 - r).abs())
            .sum();
        assert!(l1 < 0.02, "L1 distance {l1}");
    }

    #[test]
    fn random_walk_rollout() {
        let domain = RandomWalkDomain::default();
        let coder = TileCoder::uniform_unit(6, 6, 10, 4).unwrap();
        let t = domain.sample_trajectory(&coder, 300, 5).unwrap();
        assert_eq!(t.len(), 300);
        assert_eq!(t.dim(), 466_560);
        for tr in t.transitions() {
            assert_eq!(tr.x.nnz(), 10);
            assert!((0.0..=1.0).contains(&tr.reward));
        }
        for pair in t.transitions().windows(2) {
            assert_eq!(pair[0].x_next, pair[1].x);
        }
        assert_eq!(
            domain.sample_trajectory(&coder, 50, 8).unwrap(),
            domain.sample_trajectory(&coder, 50, 8).unwrap()
        );
    }
}

//! Policy evaluation on large sparse feature spaces by compressed
//! Bellman-error feature generation.
//!
//! The core loop ([`bebf::cbebf_fit`]) repeatedly projects sparse
//! observations through a small seeded Gaussian matrix, regresses TD errors
//! in the compressed space, and adds the lifted fit to a linear value
//! estimate. Around it sit an exact finite-chain oracle ([`mdp`]), a
//! compressed LSTD baseline ([`baselines`]), a tile-coding encoder, and a
//! benchmark harness with a CLI ([`bench`]).

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bebf;
pub mod bench;
pub mod error;
pub mod mdp;
pub mod projection;
pub mod rng;
pub mod sparse_linalg;

pub use error::{Error, Result};

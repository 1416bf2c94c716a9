//! Ground-truth oracle for finite fixed-policy chains (exact values,
//! stationary distributions, mixing matrices), a synthetic continuous
//! domain, tile coding, and trajectory sampling.

mod finite;
mod sample;
mod tile;

pub use finite::{FiniteMdp, MixingMatrix};
pub use sample::{RandomWalkDomain, Trajectory, Transition};
pub use tile::TileCoder;

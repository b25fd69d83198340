//! Evolutionary game of mining-pool selection in proof-of-work networks.
//!
//! * [`game`]: payoff model of a miner in a pool.
//! * [`replicator`]: mean-field replicator dynamics and an RK4 integrator.
//! * [`agents`]: finite-population pairwise proportional imitation.
//! * [`stability`]: rest points, Jacobians and ESS classification.
//! * [`experiments`]: configuration, presets and the command implementations
//!   behind the `poolgame` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod agents;
pub mod error;
pub mod experiments;
pub mod game;
pub mod plot;
pub mod replicator;
pub mod stability;

pub use error::{Error, Result};
pub use game::{NetworkParams, PoolGame, PoolStrategy, PopulationState};

#![allow(dead_code)]

use poolgame_core::{NetworkParams, PoolGame, PoolStrategy};

pub fn game(omega: &[f64], block_size: &[f64], params: NetworkParams) -> PoolGame {
    let strategies = omega
        .iter()
        .zip(block_size)
        .map(|(&w, &s)| PoolStrategy::new(w, s).unwrap())
        .collect();
    PoolGame::new(strategies, params).unwrap()
}

pub fn fig1() -> PoolGame {
    game(&[30.0, 20.0], &[100.0, 100.0], NetworkParams::default())
}

pub fn fig4() -> PoolGame {
    game(&[10.0, 20.0, 30.0, 40.0], &[100.0; 4], NetworkParams::default())
}

/// Interior rest point of the two-pool game, computed from the model
/// definitions rather than through the crate.
pub fn interior_x1(p: &NetworkParams, w: [f64; 2], s: [f64; 2]) -> f64 {
    let coef = |w: f64, s: f64| {
        (p.coinbase_reward + p.fee_rate * s) * w * (-(p.delay_coeff * s) / p.mean_block_interval).exp()
    };
    let (a, b) = (coef(w[0], s[0]), coef(w[1], s[1]));
    let n = p.population as f64;
    (a - b) / (n * p.power_price * (w[0] - w[1]).powi(2)) - w[1] / (w[0] - w[1])
}

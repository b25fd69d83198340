//! Economic model of pool mining: block-race probabilities, propagation
//! delay, orphaning, rewards and the individual miner payoff.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Mining strategy published by one pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolStrategy {
    /// Hash rate every member of the pool has to contribute.
    pub omega: f64,
    /// Size of the blocks the pool assembles.
    pub block_size: f64,
}

impl PoolStrategy {
    pub fn new(omega: f64, block_size: f64) -> Result<Self> {
        let s = Self { omega, block_size };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(invalid("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.block_size.is_finite() && self.block_size >= 0.0) {
            return Err(invalid(
                "block_size",
                format!("must be >= 0, got {}", self.block_size),
            ));
        }
        Ok(())
    }
}

/// Network-wide environment shared by all pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Seconds of propagation plus verification per unit of block size.
    pub delay_coeff: f64,
    /// Mean time between blocks, in seconds.
    pub mean_block_interval: f64,
    /// Fixed coinbase reward per block.
    pub coinbase_reward: f64,
    /// Transaction fee collected per unit of block size.
    pub fee_rate: f64,
    /// Energy price of one unit of hash rate over one block interval.
    pub power_price: f64,
    /// Number of individual miners.
    pub population: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            delay_coeff: 0.005,
            mean_block_interval: 600.0,
            coinbase_reward: 1000.0,
            fee_rate: 2.0,
            power_price: 0.01,
            population: 5000,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |field: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be >= 0, got {v}")))
            }
        };
        nonneg("delay_coeff", self.delay_coeff)?;
        nonneg("coinbase_reward", self.coinbase_reward)?;
        nonneg("fee_rate", self.fee_rate)?;
        nonneg("power_price", self.power_price)?;
        if !(self.mean_block_interval.is_finite() && self.mean_block_interval > 0.0) {
            return Err(invalid(
                "mean_block_interval",
                format!("must be > 0, got {}", self.mean_block_interval),
            ));
        }
        if self.population < 1 {
            return Err(invalid("population", "must be >= 1"));
        }
        Ok(())
    }

    /// Average time for a block of the given size to reach the network.
    pub fn propagation_delay(&self, block_size: f64) -> f64 {
        self.delay_coeff * block_size
    }

    /// Probability that a valid block of the given size gets orphaned.
    pub fn orphan_probability(&self, block_size: f64) -> f64 {
        // -expm1(-t) keeps precision for the tiny delays typical here
        -(-self.propagation_delay(block_size) / self.mean_block_interval).exp_m1()
    }

    /// Probability that a block of the given size survives propagation.
    pub fn survival_probability(&self, block_size: f64) -> f64 {
        (-self.propagation_delay(block_size) / self.mean_block_interval).exp()
    }
}

/// A point on the probability simplex: the share of miners in each pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState(Vec<f64>);

impl PopulationState {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::InvalidState("no pools".into()));
        }
        for (i, &x) in shares.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidState(format!("share {i} = {x} outside [0, 1]")));
            }
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!("shares sum to {sum}, not 1")));
        }
        Ok(Self(shares))
    }

    /// Clamps negative entries to zero and rescales onto the simplex.
    pub fn normalized(mut shares: Vec<f64>) -> Result<Self> {
        for x in shares.iter_mut() {
            if x.is_nan() {
                return Err(Error::InvalidState("NaN share".into()));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let sum: f64 = shares.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize, sum = {sum}")));
        }
        shares.iter_mut().for_each(|x| *x /= sum);
        Ok(Self(shares))
    }

    pub fn uniform(pools: usize) -> Self {
        assert!(pools > 0, "uniform state needs at least one pool");
        Self(vec![1.0 / pools as f64; pools])
    }

    pub fn vertex(pools: usize, index: usize) -> Self {
        assert!(index < pools, "vertex index out of range");
        let mut v = vec![0.0; pools];
        v[index] = 1.0;
        Self(v)
    }

    /// Two-pool state `(x, 1 - x)`.
    pub fn two_pool(x: f64) -> Result<Self> {
        Self::new(vec![x, 1.0 - x])
    }

    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidState("empty population".into()));
        }
        Ok(Self(
            counts.iter().map(|&c| c as f64 / total as f64).collect(),
        ))
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn pools(&self) -> usize {
        self.0.len()
    }

    pub fn is_vertex(&self) -> bool {
        self.0.iter().filter(|&&x| x == 1.0).count() == 1
            && self.0.iter().all(|&x| x == 0.0 || x == 1.0)
    }
}

impl std::ops::Index<usize> for PopulationState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The pool-selection game: a set of pool strategies in a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolGame {
    pub strategies: Vec<PoolStrategy>,
    pub params: NetworkParams,
}

impl PoolGame {
    pub fn new(strategies: Vec<PoolStrategy>, params: NetworkParams) -> Result<Self> {
        if strategies.is_empty() {
            return Err(invalid("strategies", "at least one pool is required"));
        }
        for s in &strategies {
            s.validate()?;
        }
        params.validate()?;
        Ok(Self { strategies, params })
    }

    pub fn pools(&self) -> usize {
        self.strategies.len()
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.strategies.iter().map(|s| s.omega)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.pools() {
            return Err(Error::PoolIndex {
                index: i,
                pools: self.pools(),
            });
        }
        Ok(())
    }

    fn check_shape(&self, x: &PopulationState) -> Result<()> {
        if x.pools() != self.pools() {
            return Err(Error::UnsupportedShape {
                expected: self.pools(),
                got: x.pools(),
            });
        }
        Ok(())
    }

    /// Total hash rate weight `sum_j omega_j x_j`. Works off-simplex.
    pub fn weighted_hash_rate(&self, x: &[f64]) -> f64 {
        self.omegas().zip(x).map(|(w, &xi)| w * xi).sum()
    }

    /// Probability that pool `i` solves the puzzle first in a round.
    pub fn mine_probability(&self, i: usize, x: &PopulationState) -> Result<f64> {
        self.check_index(i)?;
        self.check_shape(x)?;
        let total = self.weighted_hash_rate(x.shares());
        if total <= 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(self.strategies[i].omega * x[i] / total)
    }

    /// Probability that pool `i` mines a block and it is not orphaned.
    pub fn win_probability(&self, i: usize, x: &PopulationState) -> Result<f64> {
        let mine = self.mine_probability(i, x)?;
        Ok(mine * self.params.survival_probability(self.strategies[i].block_size))
    }

    /// Per-block reward of pool `i`: coinbase plus fees.
    pub fn block_reward(&self, i: usize) -> f64 {
        self.params.coinbase_reward + self.params.fee_rate * self.strategies[i].block_size
    }

    pub fn expected_pool_reward(&self, i: usize, x: &PopulationState) -> Result<f64> {
        Ok(self.block_reward(i) * self.win_probability(i, x)?)
    }

    /// `(R + rho s_i) omega_i exp(-tau(s_i)/T)`: pool `i`'s reward weight.
    ///
    /// The miner payoff is `weight_i / (N S) - p omega_i` with `S` the
    /// weighted hash rate, once the `x_i` factors cancel.
    pub fn reward_weight(&self, i: usize) -> f64 {
        let s = &self.strategies[i];
        self.block_reward(i) * s.omega * self.params.survival_probability(s.block_size)
    }

    /// Expected payoff of one miner in pool `i`. Undefined (error) when the
    /// pool is empty.
    pub fn miner_payoff(&self, i: usize, x: &PopulationState) -> Result<f64> {
        self.check_index(i)?;
        self.check_shape(x)?;
        if x[i] <= 0.0 {
            return Err(Error::EmptyPool { pool: i });
        }
        let n = self.params.population as f64;
        let share = self.block_reward(i) / (n * x[i]);
        Ok(share * self.win_probability(i, x)? - self.params.power_price * self.strategies[i].omega)
    }

    /// Payoff a miner would earn in pool `i`, continuously extended to
    /// `x_i = 0` (the payoff of a single entrant in the limit). Evaluates
    /// any coordinates, including points off the simplex.
    pub fn payoff_extended(&self, i: usize, x: &[f64]) -> f64 {
        let n = self.params.population as f64;
        let total = self.weighted_hash_rate(x);
        self.reward_weight(i) / (n * total) - self.params.power_price * self.strategies[i].omega
    }

    pub fn payoffs_extended(&self, x: &[f64]) -> Vec<f64> {
        (0..self.pools()).map(|i| self.payoff_extended(i, x)).collect()
    }

    /// Population-average payoff. Empty pools contribute nothing.
    pub fn mean_payoff(&self, x: &PopulationState) -> Result<f64> {
        self.check_shape(x)?;
        if self.weighted_hash_rate(x.shares()) <= 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(self.mean_payoff_raw(x.shares()))
    }

    /// `sum_i x_i y_i` with `x_i y_i = 0` for empty pools; no simplex check.
    pub fn mean_payoff_raw(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .filter(|(_, &xi)| xi != 0.0)
            .map(|(i, &xi)| xi * self.payoff_extended(i, x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> PoolGame {
        PoolGame::new(
            vec![
                PoolStrategy::new(30.0, 100.0).unwrap(),
                PoolStrategy::new(20.0, 100.0).unwrap(),
            ],
            NetworkParams::default(),
        )
        .unwrap()
    }

    fn state(v: &[f64]) -> PopulationState {
        PopulationState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mine_probability_examples() {
        let g = fig1();
        assert_close!(g.mine_probability(0, &state(&[0.5, 0.5])).unwrap(), 0.6, 1e-15);
        assert_eq!(g.mine_probability(0, &state(&[0.0, 1.0])).unwrap(), 0.0);

        let single = PoolGame::new(vec![PoolStrategy::new(7.0, 3.0).unwrap()], NetworkParams::default())
            .unwrap();
        assert_eq!(single.mine_probability(0, &state(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn mine_probability_rejects_bad_input() {
        let g = fig1();
        assert_eq!(
            g.mine_probability(2, &state(&[0.5, 0.5])),
            Err(Error::PoolIndex { index: 2, pools: 2 })
        );
        assert!(matches!(
            g.mine_probability(0, &state(&[1.0])),
            Err(Error::UnsupportedShape { .. })
        ));
    }

    #[test]
    fn delay_and_orphaning() {
        let p = NetworkParams::default();
        assert_close!(p.propagation_delay(100.0), 0.5, 1e-15);
        assert_close!(p.propagation_delay(200.0), 1.0, 1e-15);
        assert_eq!(p.propagation_delay(0.0), 0.0);
        assert_close!(p.orphan_probability(100.0), 8.329862075416861e-4, 1e-8);
        assert_eq!(p.orphan_probability(0.0), 0.0);
        assert_close!(p.orphan_probability(1e9), 1.0, 1e-12);
    }

    #[test]
    fn win_and_reward() {
        let g = fig1();
        let x = state(&[0.5, 0.5]);
        assert_close!(g.win_probability(0, &x).unwrap(), 0.599500208275475, 1e-5);
        assert_close!(g.expected_pool_reward(0, &x).unwrap(), 719.40024993057, 0.01);
        assert_eq!(g.win_probability(0, &state(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(g.expected_pool_reward(0, &state(&[0.0, 1.0])).unwrap(), 0.0);

        let mut no_delay = g.clone();
        no_delay.params.delay_coeff = 0.0;
        assert_eq!(
            no_delay.win_probability(0, &x).unwrap(),
            no_delay.mine_probability(0, &x).unwrap()
        );

        let mut free = g.clone();
        free.params.coinbase_reward = 0.0;
        free.params.fee_rate = 0.0;
        assert_eq!(free.expected_pool_reward(0, &x).unwrap(), 0.0);
    }

    #[test]
    fn payoff_examples() {
        let g = fig1();
        let x = state(&[0.4, 0.6]);
        assert_close!(g.miner_payoff(0, &x).unwrap(), -2.498958622624836e-4, 1e-6);
        assert_close!(g.miner_payoff(1, &x).unwrap(), -1.6659724150835942e-4, 1e-6);
        assert_close!(g.mean_payoff(&x).unwrap(), -1.999166898100091e-4, 1e-6);
        assert_eq!(g.miner_payoff(0, &state(&[0.0, 1.0])), Err(Error::EmptyPool { pool: 0 }));
    }

    #[test]
    fn single_pool_without_cost_splits_reward() {
        let params = NetworkParams { power_price: 0.0, ..Default::default() };
        let g = PoolGame::new(vec![PoolStrategy::new(12.0, 100.0).unwrap()], params).unwrap();
        let expected = 1200.0 * (-0.5f64 / 600.0).exp() / 5000.0;
        assert_close!(g.miner_payoff(0, &state(&[1.0])).unwrap(), expected, 1e-15);
        assert_close!(g.mean_payoff(&state(&[1.0])).unwrap(), expected, 1e-15);
    }

    #[test]
    fn payoff_forms_agree() {
        let g = fig1();
        let x = state(&[0.3, 0.7]);
        for i in 0..2 {
            assert_close!(
                g.miner_payoff(i, &x).unwrap(),
                g.payoff_extended(i, x.shares()),
                1e-15
            );
        }
    }

    #[test]
    fn state_validation() {
        assert!(PopulationState::new(vec![0.5, 0.6]).is_err());
        assert!(PopulationState::new(vec![-0.1, 1.1]).is_err());
        assert!(PopulationState::new(vec![]).is_err());
        let n = PopulationState::normalized(vec![-1e-13, 2.0, 2.0]).unwrap();
        assert_eq!(n.shares(), &[0.0, 0.5, 0.5]);
        assert!(PopulationState::vertex(3, 1).is_vertex());
        assert!(!PopulationState::uniform(3).is_vertex());
    }

    #[test]
    fn parameter_validation() {
        assert!(PoolStrategy::new(0.0, 1.0).is_err());
        assert!(PoolStrategy::new(1.0, -1.0).is_err());
        let mut p = NetworkParams { mean_block_interval: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        p = NetworkParams::default();
        p.population = 0;
        assert!(p.validate().is_err());
        p = NetworkParams::default();
        p.fee_rate = -1.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { field: "fee_rate", .. })
        ));
    }
}

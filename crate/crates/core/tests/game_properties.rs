mod common;

use poolgame_core::{NetworkParams, PoolGame, PoolStrategy, PopulationState};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = NetworkParams> {
    (0.0..0.1f64, 60.0..1200.0f64, 1.0..5000.0f64, 0.0..10.0f64, 1e-4..0.1f64, 10u64..100_000).prop_map(
        |(d, t, r, rho, p, n)| NetworkParams {
            delay_coeff: d,
            mean_block_interval: t,
            coinbase_reward: r,
            fee_rate: rho,
            power_price: p,
            population: n,
        },
    )
}

fn strategies(m: usize) -> impl Strategy<Value = Vec<PoolStrategy>> {
    prop::collection::vec((0.1..100.0f64, 0.0..1000.0f64), m)
        .prop_map(|v| v.into_iter().map(|(w, s)| PoolStrategy::new(w, s).unwrap()).collect())
}

fn interior_state(m: usize) -> impl Strategy<Value = PopulationState> {
    prop::collection::vec(0.01..1.0f64, m).prop_map(|v| PopulationState::normalized(v).unwrap())
}

fn game_and_state() -> impl Strategy<Value = (PoolGame, PopulationState)> {
    (2usize..6).prop_flat_map(|m| {
        (strategies(m), params(), interior_state(m))
            .prop_map(|(s, p, x)| (PoolGame::new(s, p).unwrap(), x))
    })
}

proptest! {
    #[test]
    fn mine_probabilities_sum_to_one((g, x) in game_and_state()) {
        let total: f64 = (0..g.pools()).map(|i| g.mine_probability(i, &x).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orphan_probability_monotone(p in params(), s in 0.0..1000.0f64, ds in 0.0..100.0f64, dk in 0.0..0.1f64) {
        let base = p.orphan_probability(s);
        prop_assert!(p.orphan_probability(s + ds) >= base);
        let mut q = p;
        q.delay_coeff += dk;
        prop_assert!(q.orphan_probability(s) >= base);
        prop_assert!((0.0..1.0).contains(&base));
    }

    #[test]
    fn win_never_exceeds_mine((g, x) in game_and_state()) {
        for i in 0..g.pools() {
            let win = g.win_probability(i, &x).unwrap();
            let mine = g.mine_probability(i, &x).unwrap();
            let delay = g.params.delay_coeff * g.strategies[i].block_size;
            if delay == 0.0 {
                prop_assert_eq!(win, mine);
            } else {
                prop_assert!(win < mine);
            }
        }
    }

    #[test]
    fn payoff_decreasing_in_power_price((g, x) in game_and_state(), dp in 1e-4..0.1f64) {
        let mut dearer = g.clone();
        dearer.params.power_price += dp;
        for i in 0..g.pools() {
            prop_assert!(dearer.miner_payoff(i, &x).unwrap() < g.miner_payoff(i, &x).unwrap());
        }
    }

    #[test]
    fn mean_payoff_between_extremes((g, x) in game_and_state()) {
        let y: Vec<f64> = (0..g.pools()).map(|i| g.miner_payoff(i, &x).unwrap()).collect();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = g.mean_payoff(&x).unwrap();
        let slack = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        prop_assert!(mean >= lo - slack && mean <= hi + slack);
    }

    #[test]
    fn mean_payoff_ignores_empty_pools(
        (g, x) in game_and_state(),
        empty in 0usize..6,
    ) {
        let m = g.pools();
        let mut v = x.into_inner();
        v[empty % m] = 0.0;
        let x = PopulationState::normalized(v).unwrap();
        let inhabited: Vec<f64> = (0..m)
            .filter(|&i| x[i] > 0.0)
            .map(|i| g.miner_payoff(i, &x).unwrap())
            .collect();
        let lo = inhabited.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = inhabited.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = g.mean_payoff(&x).unwrap();
        let slack = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        prop_assert!(mean >= lo - slack && mean <= hi + slack);
    }

    #[test]
    fn mine_probability_scale_invariant((g, x) in game_and_state(), c in 0.01..100.0f64) {
        let mut scaled = g.clone();
        for s in &mut scaled.strategies {
            s.omega *= c;
        }
        for i in 0..g.pools() {
            let a = g.mine_probability(i, &x).unwrap();
            let b = scaled.mine_probability(i, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn fig1_payoffs_match_definition() {
    let g = common::fig1();
    let p = g.params;
    let x = PopulationState::two_pool(0.4).unwrap();
    let surv = (-(p.delay_coeff * 100.0) / p.mean_block_interval).exp();
    let total = 30.0 * 0.4 + 20.0 * 0.6;
    for (i, (w, share)) in [(30.0, 0.4), (20.0, 0.6)].into_iter().enumerate() {
        let mine = w * share / total;
        let expected = (p.coinbase_reward + p.fee_rate * 100.0) / (p.population as f64 * share) * mine * surv
            - p.power_price * w;
        let got = g.miner_payoff(i, &x).unwrap();
        assert!((got - expected).abs() < 1e-15, "pool {i}: {got} vs {expected}");
    }
}

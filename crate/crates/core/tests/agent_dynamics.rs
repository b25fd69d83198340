mod common;

use poolgame_core::agents::{self, revision_round, round_duration, AgentPopulation, SimConfig};
use poolgame_core::replicator::{integrate, IntegratorConfig};
use poolgame_core::{NetworkParams, PopulationState};
use proptest::prelude::*;
use rayon::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn miner_count_is_conserved(seed in any::<u64>(), n in 10usize..2000, rounds in 1u64..20) {
        let g = common::fig4();
        let mut pop = AgentPopulation::random(n, 4, seed).unwrap();
        let cfg = SimConfig { seed, rate_scale: 20.0, ..Default::default() };
        for r in 0..rounds {
            pop = revision_round(&g, &pop, &cfg, r);
            prop_assert_eq!(pop.counts().iter().sum::<usize>(), n);
            prop_assert_eq!(pop.assignments().len(), n);
        }
    }

    #[test]
    fn empty_pools_never_repopulate(seed in any::<u64>()) {
        let g = common::fig4();
        let x = PopulationState::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let cfg = SimConfig { seed, max_rounds: 200, rate_scale: 20.0, record_every: 1, ..Default::default() };
        let out = agents::run(&g, AgentPopulation::from_state(400, &x).unwrap(), &cfg).unwrap();
        for s in &out.trajectory.states {
            prop_assert_eq!(s[1], 0.0);
            prop_assert_eq!(s[3], 0.0);
        }
    }
}

/// fig1 game with rewards scaled by N / 5000 so the rest point stays put.
fn final_shares(n: u64, seeds: std::ops::Range<u64>) -> Vec<f64> {
    let base = NetworkParams::default();
    let k = n as f64 / base.population as f64;
    let g = common::game(
        &[30.0, 20.0],
        &[100.0, 100.0],
        NetworkParams {
            population: n,
            coinbase_reward: base.coinbase_reward * k,
            fee_rate: base.fee_rate * k,
            ..base
        },
    );
    let x0 = PopulationState::two_pool(0.75).unwrap();
    seeds
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig { seed, parallel: false, ..Default::default() };
            let pop = AgentPopulation::from_state(n as usize, &x0).unwrap();
            agents::run(&g, pop, &cfg).unwrap().final_state()[0]
        })
        .collect()
}

fn variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn seed_average_tracks_the_mean_field() {
    let g = common::fig1();
    let x0 = PopulationState::two_pool(0.75).unwrap();
    let icfg = IntegratorConfig { record_every: 1, ..Default::default() };
    let ode = integrate(&g, &x0, &icfg).unwrap();
    let rounds = 3000u64;
    let runs: Vec<Vec<f64>> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig {
                seed,
                max_rounds: rounds,
                convergence_window: usize::MAX,
                parallel: false,
                ..Default::default()
            };
            let out = agents::run(&g, AgentPopulation::from_state(5000, &x0).unwrap(), &cfg).unwrap();
            out.trajectory.states.iter().map(|s| s[0]).collect()
        })
        .collect();
    let dt_round = round_duration(2, 1.0);
    let mut worst = 0.0f64;
    for r in (0..=rounds as usize).step_by(10) {
        let t = r as f64 * dt_round;
        // ODE is recorded on a 0.1 grid
        let k = ((t / icfg.step).round() as usize).min(ode.trajectory.len() - 1);
        let avg = runs.iter().map(|v| v[r.min(v.len() - 1)]).sum::<f64>() / runs.len() as f64;
        worst = worst.max((avg - ode.trajectory.states[k][0]).abs());
    }
    assert!(worst < 0.05, "largest gap {worst}");
}

#[test]
fn final_state_spread_shrinks_with_population() {
    let small_runs = final_shares(500, 0..30);
    let x_star = common::interior_x1(&common::fig1().params, [30.0, 20.0], [100.0, 100.0]);
    assert!(small_runs.iter().all(|&x| x > 0.0 && x < 1.0 && (x - x_star).abs() < 0.1));
    let small = variance(&small_runs);
    let large = variance(&final_shares(5000, 0..30));
    assert!(large < small, "var N=5000 {large} vs N=500 {small}");
}

//! Finite-population simulation of pairwise proportional imitation.
//!
//! Each round every miner samples a candidate pool uniformly from all `M`
//! pools and switches to it with probability
//! `clamp(rate_scale * x_j * max(y_j - y_i, 0), 0, 1)`, where `x` is the
//! population state frozen at the start of the round.
//!
//! Randomness is ChaCha8 keyed by the 64-bit seed. Round `r` uses stream `r`
//! and miner `k` owns the four 32-bit words starting at word `4k` of that
//! stream (one `u64` for the candidate, one for the switch test). Draws are
//! therefore independent of evaluation order and thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{PoolGame, PopulationState};
use crate::replicator::Trajectory;

/// Name of the generator, recorded in output headers.
pub const RNG_ALGORITHM: &str = "ChaCha8";

const WORDS_PER_MINER: u128 = 4;
const CHUNK: usize = 4096;

/// Pool membership of every miner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPopulation {
    assignments: Vec<usize>,
    counts: Vec<usize>,
}

impl AgentPopulation {
    pub fn from_assignments(assignments: Vec<usize>, pools: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(invalid("population", "at least one miner is required"));
        }
        let mut counts = vec![0; pools];
        for &a in &assignments {
            if a >= pools {
                return Err(Error::PoolIndex { index: a, pools });
            }
            counts[a] += 1;
        }
        Ok(Self { assignments, counts })
    }

    /// `miners` agents apportioned to match `x` as closely as possible
    /// (largest remainder), pool 0 first.
    pub fn from_state(miners: usize, x: &PopulationState) -> Result<Self> {
        if miners == 0 {
            return Err(invalid("population", "at least one miner is required"));
        }
        let exact: Vec<f64> = x.shares().iter().map(|&s| s * miners as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
        let mut left = miners - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        // stable sort keeps lower pool indices first on ties
        order.sort_by(|&i, &j| {
            let ri = exact[i] - exact[i].floor();
            let rj = exact[j] - exact[j].floor();
            rj.total_cmp(&ri)
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if x[i] > 0.0 {
                counts[i] += 1;
                left -= 1;
            }
        }
        let assignments = counts
            .iter()
            .enumerate()
            .flat_map(|(pool, &c)| std::iter::repeat_n(pool, c))
            .collect();
        Ok(Self { assignments, counts })
    }

    /// Every miner picks a pool uniformly at random (seeded).
    pub fn random(miners: usize, pools: usize, seed: u64) -> Result<Self> {
        if pools == 0 {
            return Err(invalid("strategies", "at least one pool is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assignments = (0..miners).map(|_| rng.random_range(0..pools)).collect();
        Self::from_assignments(assignments, pools)
    }

    pub fn miners(&self) -> usize {
        self.assignments.len()
    }

    pub fn pools(&self) -> usize {
        self.counts.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn state(&self) -> PopulationState {
        PopulationState::from_counts(&self.counts).expect("population is non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub max_rounds: u64,
    pub rate_scale: f64,
    /// Rounds over which movement is measured for the stopping rule.
    pub convergence_window: usize,
    /// Stop once no share moved more than this within the window.
    pub convergence_tol: f64,
    /// Keep every n-th round in the trajectory (the last one is always kept).
    pub record_every: u64,
    /// Update miners of a round on the rayon pool.
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            max_rounds: 50_000,
            rate_scale: 1.0,
            convergence_window: 500,
            convergence_tol: 5e-4,
            record_every: 1,
            parallel: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds < 1 {
            return Err(invalid("max_rounds", "must be >= 1"));
        }
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            return Err(invalid("rate_scale", "must be > 0"));
        }
        if self.convergence_window == 0 {
            return Err(invalid("convergence_window", "must be >= 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be >= 1"));
        }
        Ok(())
    }
}

/// Switch probabilities for every (current, candidate) pair at state `x`.
#[derive(Debug, Clone)]
pub struct SwitchTable {
    pools: usize,
    probs: Vec<f64>,
}

impl SwitchTable {
    pub fn new(game: &PoolGame, x: &PopulationState, rate_scale: f64) -> Self {
        let m = game.pools();
        let y = game.payoffs_extended(x.shares());
        let mut probs = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                probs[i * m + j] = (rate_scale * x[j] * (y[j] - y[i]).max(0.0)).clamp(0.0, 1.0);
            }
        }
        Self { pools: m, probs }
    }

    pub fn get(&self, current: usize, candidate: usize) -> f64 {
        self.probs[current * self.pools + candidate]
    }
}

/// Probability that a miner in `current` moves to a sampled `candidate`.
pub fn switch_probability(
    game: &PoolGame,
    current: usize,
    candidate: usize,
    x: &PopulationState,
    rate_scale: f64,
) -> Result<f64> {
    let m = game.pools();
    for idx in [current, candidate] {
        if idx >= m {
            return Err(Error::PoolIndex { index: idx, pools: m });
        }
    }
    if x[candidate] == 0.0 {
        return Ok(0.0);
    }
    let y = game.payoffs_extended(x.shares());
    Ok((rate_scale * x[candidate] * (y[candidate] - y[current]).max(0.0)).clamp(0.0, 1.0))
}

/// Maps a `u64` onto `0..n` by widening multiplication.
fn bounded(word: u64, n: usize) -> usize {
    ((word as u128 * n as u128) >> 64) as usize
}

fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn update_chunk(
    seed: u64,
    round: u64,
    first_miner: usize,
    table: &SwitchTable,
    slots: &mut [usize],
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng.set_word_pos(first_miner as u128 * WORDS_PER_MINER);
    let m = table.pools;
    for slot in slots.iter_mut() {
        let candidate = bounded(rng.next_u64(), m);
        let u = unit_f64(rng.next_u64());
        if u < table.get(*slot, candidate) {
            *slot = candidate;
        }
    }
}

/// One synchronous revision round. `round` selects the random stream.
pub fn revision_round(
    game: &PoolGame,
    pop: &AgentPopulation,
    cfg: &SimConfig,
    round: u64,
) -> AgentPopulation {
    let table = SwitchTable::new(game, &pop.state(), cfg.rate_scale);
    let mut next = pop.assignments.clone();
    if cfg.parallel {
        next.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, slots)| update_chunk(cfg.seed, round, c * CHUNK, &table, slots));
    } else {
        update_chunk(cfg.seed, round, 0, &table, &mut next);
    }
    let mut counts = vec![0; pop.pools()];
    for &a in &next {
        counts[a] += 1;
    }
    AgentPopulation {
        assignments: next,
        counts,
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// Empirical states. Time is in replicator units: one round advances
    /// `rate_scale / M`, which is the expected drift of one round.
    pub trajectory: Trajectory,
    pub final_population: AgentPopulation,
    pub rounds: u64,
    pub converged: bool,
}

impl SimOutcome {
    pub fn final_state(&self) -> PopulationState {
        self.final_population.state()
    }
}

/// Replicator time elapsed in one revision round.
pub fn round_duration(pools: usize, rate_scale: f64) -> f64 {
    rate_scale / pools as f64
}

/// Iterates revision rounds until the empirical state settles or
/// `cfg.max_rounds` rounds have run.
pub fn run(game: &PoolGame, initial: AgentPopulation, cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    if initial.pools() != game.pools() {
        return Err(Error::UnsupportedShape {
            expected: game.pools(),
            got: initial.pools(),
        });
    }
    let dt = round_duration(game.pools(), cfg.rate_scale);
    let mut traj = Trajectory::default();
    traj.push(0.0, initial.state());

    let mut window: std::collections::VecDeque<Vec<usize>> = std::collections::VecDeque::new();
    window.push_back(initial.counts.clone());
    let tol_count = cfg.convergence_tol * initial.miners() as f64;

    let mut pop = initial;
    let mut round = 0;
    let mut converged = false;
    let mut recorded_last = true;
    while round < cfg.max_rounds {
        pop = revision_round(game, &pop, cfg, round);
        round += 1;
        recorded_last = round.is_multiple_of(cfg.record_every);
        if recorded_last {
            traj.push(round as f64 * dt, pop.state());
        }
        window.push_back(pop.counts.clone());
        if window.len() > cfg.convergence_window.saturating_add(1) {
            window.pop_front();
        }
        if window.len() == cfg.convergence_window.saturating_add(1) && settled(&window, tol_count) {
            converged = true;
            break;
        }
    }
    if !recorded_last {
        traj.push(round as f64 * dt, pop.state());
    }
    log::debug!("agent run: {round} rounds, converged = {converged}");
    Ok(SimOutcome {
        trajectory: traj,
        final_population: pop,
        rounds: round,
        converged,
    })
}

/// Whether every pool's count stayed within `tol_count` of its latest value
/// over the window.
fn settled(window: &std::collections::VecDeque<Vec<usize>>, tol_count: f64) -> bool {
    let latest = window.back().expect("non-empty window");
    window.iter().all(|counts| {
        counts
            .iter()
            .zip(latest)
            .all(|(&c, &l)| (c as f64 - l as f64).abs() < tol_count)
    })
}

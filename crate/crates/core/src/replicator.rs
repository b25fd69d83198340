//! Replicator dynamics `dx_i/dt = x_i (y_i(x) - ybar(x))` and a fixed-step
//! RK4 integrator that keeps the state on the simplex.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{PoolGame, PopulationState};

impl PoolGame {
    /// Replicator vector field at `x`. Evaluates the formula as written for
    /// any coordinates; an empty pool has zero velocity.
    pub fn replicator_rhs_raw(&self, x: &[f64]) -> Vec<f64> {
        let payoffs = self.payoffs_extended(x);
        let mean: f64 = x
            .iter()
            .zip(&payoffs)
            .filter(|(&xi, _)| xi != 0.0)
            .map(|(xi, yi)| xi * yi)
            .sum();
        x.iter()
            .zip(&payoffs)
            .map(|(&xi, &yi)| if xi == 0.0 { 0.0 } else { xi * (yi - mean) })
            .collect()
    }

    pub fn replicator_rhs(&self, x: &PopulationState) -> Result<Vec<f64>> {
        if x.pools() != self.pools() {
            return Err(Error::UnsupportedShape {
                expected: self.pools(),
                got: x.pools(),
            });
        }
        Ok(self.replicator_rhs_raw(x.shares()))
    }

    /// Sup-norm of the replicator field.
    /// Sup-norm of the vector field; NaN if any component is NaN.
    pub fn rhs_norm(&self, x: &[f64]) -> f64 {
        self.replicator_rhs_raw(x)
            .into_iter()
            .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    /// Two-pool dynamics in the factored form
    /// `x(1-x) [(a-b) / (N (w1 x + w2 (1-x))) - p (w1 - w2)]`.
    pub fn reduced_rhs_two_pool(&self, x1: f64) -> Result<f64> {
        self.require_two_pools()?;
        Ok(x1 * (1.0 - x1) * self.reduced_bracket(x1))
    }

    /// The bracket of [`Self::reduced_rhs_two_pool`]: `y_1 - y_2` at `(x, 1-x)`.
    pub(crate) fn reduced_bracket(&self, x1: f64) -> f64 {
        let (w1, w2) = (self.strategies[0].omega, self.strategies[1].omega);
        let (a, b) = (self.reward_weight(0), self.reward_weight(1));
        let n = self.params.population as f64;
        (a - b) / (n * (w1 * x1 + w2 * (1.0 - x1))) - self.params.power_price * (w1 - w2)
    }

    pub(crate) fn require_two_pools(&self) -> Result<()> {
        if self.pools() != 2 {
            return Err(Error::UnsupportedShape {
                expected: 2,
                got: self.pools(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_time: f64,
    /// Convergence threshold on the sup-norm of the vector field.
    pub convergence_tol: f64,
    /// Keep every n-th step in the trajectory (the last state is always kept).
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_time: 1e4,
            convergence_tol: 1e-9,
            record_every: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("step", "must be > 0"));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(invalid("max_time", "must be > 0"));
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

/// Per-pool payoffs and the population mean at one recorded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffRow {
    pub per_pool: Vec<f64>,
    pub mean: f64,
}

/// Time-indexed sequence of population states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
    pub payoffs: Option<Vec<PayoffRow>>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, x: PopulationState) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&PopulationState> {
        self.states.last()
    }

    /// Fills in payoffs for every recorded state. Empty pools get the
    /// payoff a single entrant would receive.
    pub fn with_payoffs(mut self, game: &PoolGame) -> Self {
        let rows = self
            .states
            .iter()
            .map(|x| PayoffRow {
                per_pool: game.payoffs_extended(x.shares()),
                mean: game.mean_payoff_raw(x.shares()),
            })
            .collect();
        self.payoffs = Some(rows);
        self
    }

    /// Writes `t,x_1..x_M[,y_1..y_M,mean_payoff]` with 9 significant digits.
    /// `comment` lines, if any, are written first prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: &[String]) -> Result<()> {
        for line in comment {
            writeln!(out, "# {line}")?;
        }
        let m = self.states.first().map_or(0, |s| s.pools());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("x_{i}")));
        if self.payoffs.is_some() {
            header.extend((1..=m).map(|i| format!("y_{i}")));
            header.push("mean_payoff".into());
        }
        w.write_record(&header)?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![fmt_sig(*t)];
            row.extend(x.shares().iter().map(|&v| fmt_sig(v)));
            if let Some(p) = &self.payoffs {
                row.extend(p[k].per_pool.iter().map(|&v| fmt_sig(v)));
                row.push(fmt_sig(p[k].mean));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats a float with 9 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0.00000000e0"
        return "0.00000000e0".into();
    }
    format!("{v:.8e}")
}

/// Result of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub converged: bool,
    /// Sup-norm of the vector field at the final state.
    pub final_residual: f64,
}

impl Integration {
    pub fn final_state(&self) -> &PopulationState {
        self.trajectory.last().expect("trajectory always has the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.trajectory.times.last().expect("non-empty trajectory")
    }
}

/// One classical RK4 step followed by clamping and renormalisation.
fn rk4_step(game: &PoolGame, x: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(ai, ki)| ai + s * ki).collect()
    };
    let k1 = game.replicator_rhs_raw(x);
    let k2 = game.replicator_rhs_raw(&axpy(x, &k1, h / 2.0));
    let k3 = game.replicator_rhs_raw(&axpy(x, &k2, h / 2.0));
    let k4 = game.replicator_rhs_raw(&axpy(x, &k3, h));
    let mut next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    for v in next.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= sum);
    next
}

/// Integrates the replicator dynamics from `x0` until the field's sup-norm
/// drops below `cfg.convergence_tol` or `cfg.max_time` is reached.
pub fn integrate(game: &PoolGame, x0: &PopulationState, cfg: &IntegratorConfig) -> Result<Integration> {
    cfg.validate()?;
    if x0.pools() != game.pools() {
        return Err(Error::UnsupportedShape {
            expected: game.pools(),
            got: x0.pools(),
        });
    }
    let mut traj = Trajectory::default();
    let mut x = x0.shares().to_vec();
    let mut t = 0.0;
    let mut step: u64 = 0;
    traj.push(t, x0.clone());
    let max_steps = (cfg.max_time / cfg.step).ceil() as u64;
    let mut residual = game.rhs_norm(&x);
    if !residual.is_finite() {
        return Err(Error::NumericalFailure { time: t });
    }
    let mut recorded_last = true;

    while residual >= cfg.convergence_tol && step < max_steps {
        let next = rk4_step(game, &x, cfg.step);
        step += 1;
        t = step as f64 * cfg.step;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure { time: t });
        }
        x = next;
        residual = game.rhs_norm(&x);
        if !residual.is_finite() {
            return Err(Error::NumericalFailure { time: t });
        }
        recorded_last = step.is_multiple_of(cfg.record_every as u64);
        if recorded_last {
            traj.push(t, PopulationState::normalized(x.clone())?);
        }
    }
    if !recorded_last {
        traj.push(t, PopulationState::normalized(x)?);
    }
    let converged = residual < cfg.convergence_tol;
    log::debug!("integration stopped at t = {t}, residual {residual:e}, converged = {converged}");
    Ok(Integration {
        trajectory: traj,
        converged,
        final_residual: residual,
    })
}

//! Experiment configuration, the built-in scenario presets and the
//! implementations of the `evolve`, `agents`, `phase`, `sweep` and
//! `classify` commands.
//!
//! Commands compute everything first and return the output files as an
//! in-memory [`Artifacts`] set; [`Artifacts::write_to`] then writes each file
//! once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{self, AgentPopulation, SimConfig, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::game::{NetworkParams, PoolGame, PoolStrategy, PopulationState};
use crate::plot::{Chart, Series, Style};
use crate::replicator::{fmt_sig, integrate, IntegratorConfig, Trajectory};
use crate::stability::{self, RestPointKind, RestPointReport, Verdict};

/// Names of the shipped presets.
pub const PRESETS: [&str; 3] = ["fig1", "fig3", "fig4"];

/// Delay-coefficient grid of the `fig3` preset.
pub const FIG3_DELAY_GRID: [f64; 7] = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

/// Points on the `phase` grid.
pub const PHASE_GRID_POINTS: usize = 201;

/// Residual target when refining a state before classifying it.
pub const REFINE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ode,
    Agents,
    Both,
}

impl Engine {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ode" => Ok(Engine::Ode),
            "agents" => Ok(Engine::Agents),
            "both" => Ok(Engine::Both),
            other => Err(config_err("engine", format!("unknown engine `{other}` (ode|agents|both)"))),
        }
    }

    fn ode(self) -> bool {
        matches!(self, Engine::Ode | Engine::Both)
    }

    fn agents(self) -> bool {
        matches!(self, Engine::Agents | Engine::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Explicit(PopulationState),
    Uniform,
    /// Every miner picks a pool uniformly at random with this seed.
    Random(u64),
}

impl InitialState {
    fn parse(v: &toml::Value) -> Result<Self> {
        match v {
            toml::Value::String(s) if s == "uniform" => Ok(Self::Uniform),
            toml::Value::String(s) => {
                let seed = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|r| r.trim().parse::<u64>().ok())
                    .ok_or_else(|| {
                        config_err("initial_state", format!("expected \"uniform\", \"random(<seed>)\" or an array, got `{s}`"))
                    })?;
                Ok(Self::Random(seed))
            }
            toml::Value::Array(items) => {
                let shares = items
                    .iter()
                    .map(|i| match i {
                        toml::Value::Float(f) => Ok(*f),
                        toml::Value::Integer(n) => Ok(*n as f64),
                        _ => Err(config_err("initial_state", "array entries must be numbers")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                PopulationState::new(shares)
                    .map(Self::Explicit)
                    .map_err(|e| config_err("initial_state", e.to_string()))
            }
            _ => Err(config_err("initial_state", "expected a string or an array")),
        }
    }

    fn to_toml(&self) -> String {
        match self {
            Self::Uniform => "\"uniform\"".into(),
            Self::Random(s) => format!("\"random({s})\""),
            Self::Explicit(x) => format!(
                "[{}]",
                x.shares().iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    DelayCoeff,
    PowerPrice,
    FeeRate,
    CoinbaseReward,
    Population,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::DelayCoeff => "delay_coeff",
            SweepParameter::PowerPrice => "power_price",
            SweepParameter::FeeRate => "fee_rate",
            SweepParameter::CoinbaseReward => "coinbase_reward",
            SweepParameter::Population => "population",
        }
    }

    pub fn apply(self, params: &mut NetworkParams, value: f64) -> Result<()> {
        match self {
            SweepParameter::DelayCoeff => params.delay_coeff = value,
            SweepParameter::PowerPrice => params.power_price = value,
            SweepParameter::FeeRate => params.fee_rate = value,
            SweepParameter::CoinbaseReward => params.coinbase_reward = value,
            SweepParameter::Population => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                    return Err(config_err("sweep.values", format!("population must be a positive integer, got {value}")));
                }
                params.population = value as u64;
            }
        }
        params
            .validate()
            .map_err(|e| config_err("sweep.values", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub strategies: Vec<PoolStrategy>,
    pub params: NetworkParams,
    pub initial_state: InitialState,
    pub engine: Engine,
    pub sweep: Option<Sweep>,
    pub output: PathBuf,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub agents: SimConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolsSection {
    omega: Vec<f64>,
    block_size: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    #[serde(default)]
    engine: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    initial_state: Option<toml::Value>,
    network: NetworkParams,
    pools: PoolsSection,
    #[serde(default)]
    integrator: Option<IntegratorConfig>,
    #[serde(default)]
    agents: Option<AgentsSection>,
    #[serde(default)]
    sweep: Option<Sweep>,
}

/// `[agents]` table; the seed lives at the top level.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AgentsSection {
    max_rounds: u64,
    rate_scale: f64,
    convergence_window: usize,
    convergence_tol: f64,
    record_every: u64,
    parallel: bool,
}

impl Default for AgentsSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            max_rounds: d.max_rounds,
            rate_scale: d.rate_scale,
            convergence_window: d.convergence_window,
            convergence_tol: d.convergence_tol,
            record_every: d.record_every,
            parallel: d.parallel,
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Maps a validation error from the model onto the config section it came from.
fn scoped(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => config_err(&format!("{section}.{field}"), reason),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let two = |w: [f64; 2]| -> Vec<PoolStrategy> {
            w.iter().map(|&omega| PoolStrategy { omega, block_size: 100.0 }).collect()
        };
        let base = |scenario: &str, strategies: Vec<PoolStrategy>, x0: InitialState, engine: Engine| Self {
            scenario: scenario.into(),
            strategies,
            params: NetworkParams::default(),
            initial_state: x0,
            engine,
            sweep: None,
            output: PathBuf::from("out").join(scenario),
            seed: 42,
            integrator: IntegratorConfig::default(),
            agents: SimConfig::default(),
        };
        let fig1_x0 = InitialState::Explicit(PopulationState::two_pool(0.75).expect("valid"));
        match name {
            "fig1" => Some(base("fig1", two([30.0, 20.0]), fig1_x0, Engine::Ode)),
            "fig3" => {
                let mut c = base("fig3", two([30.0, 20.0]), fig1_x0, Engine::Ode);
                c.sweep = Some(Sweep {
                    parameter: SweepParameter::DelayCoeff,
                    values: FIG3_DELAY_GRID.to_vec(),
                });
                Some(c)
            }
            "fig4" => {
                let pools = [10.0, 20.0, 30.0, 40.0]
                    .iter()
                    .map(|&omega| PoolStrategy { omega, block_size: 100.0 })
                    .collect();
                Some(base("fig4", pools, InitialState::Uniform, Engine::Both))
            }
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(|| "<config>".to_string(), |s| {
                // report the key the parser choked on
                text.get(s).unwrap_or("<config>").trim().to_string()
            });
            config_err(&field, e.message().to_string())
        })?;
        let PoolsSection { omega, block_size } = raw.pools;
        if omega.len() != block_size.len() {
            return Err(config_err(
                "pools.block_size",
                format!("{} block sizes for {} pools", block_size.len(), omega.len()),
            ));
        }
        let strategies = omega
            .iter()
            .zip(&block_size)
            .map(|(&w, &s)| PoolStrategy::new(w, s).map_err(|e| scoped("pools", e)))
            .collect::<Result<Vec<_>>>()?;
        let agents = raw.agents.unwrap_or_default();
        let seed = raw.seed.unwrap_or(42);
        let cfg = Self {
            output: raw
                .output
                .unwrap_or_else(|| PathBuf::from("out").join(&raw.scenario)),
            scenario: raw.scenario,
            strategies,
            params: raw.network,
            initial_state: match &raw.initial_state {
                Some(v) => InitialState::parse(v)?,
                None => InitialState::Uniform,
            },
            engine: Engine::parse(raw.engine.as_deref().unwrap_or("ode"))?,
            sweep: raw.sweep,
            seed,
            integrator: raw.integrator.unwrap_or_default(),
            agents: SimConfig {
                seed,
                max_rounds: agents.max_rounds,
                rate_scale: agents.rate_scale,
                convergence_window: agents.convergence_window,
                convergence_tol: agents.convergence_tol,
                record_every: agents.record_every,
                parallel: agents.parallel,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file, or a preset when `source` names one and no such
    /// file exists.
    pub fn load(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err("--config", format!("cannot read {source}: {e}")))?;
            return Self::from_toml_str(&text);
        }
        Self::preset(source).ok_or_else(|| {
            config_err(
                "--config",
                format!("no file `{source}` and no preset of that name (presets: {})", PRESETS.join(", ")),
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.len() < 2 {
            return Err(config_err("pools.omega", "at least two pools are required"));
        }
        for s in &self.strategies {
            s.validate().map_err(|e| scoped("pools", e))?;
        }
        self.params.validate().map_err(|e| scoped("network", e))?;
        if let InitialState::Explicit(x) = &self.initial_state {
            if x.pools() != self.strategies.len() {
                return Err(config_err(
                    "initial_state",
                    format!("{} shares for {} pools", x.pools(), self.strategies.len()),
                ));
            }
        }
        self.integrator.validate().map_err(|e| scoped("integrator", e))?;
        self.agents.validate().map_err(|e| scoped("agents", e))?;
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(config_err("sweep.values", "grid is empty"));
            }
            let mut p = self.params;
            for &v in &sw.values {
                sw.parameter.apply(&mut p, v)?;
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.agents.seed = seed;
        self
    }

    pub fn game(&self) -> Result<PoolGame> {
        PoolGame::new(self.strategies.clone(), self.params)
    }

    /// Renders the config in the same format [`Self::from_toml_str`] reads.
    pub fn to_toml(&self) -> String {
        let list = |v: &mut dyn Iterator<Item = f64>| v.map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let p = &self.params;
        let i = &self.integrator;
        let a = &self.agents;
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {:?}", self.scenario);
        let _ = writeln!(s, "engine = \"{}\"", match self.engine {
            Engine::Ode => "ode",
            Engine::Agents => "agents",
            Engine::Both => "both",
        });
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output = {:?}", self.output.to_string_lossy());
        let _ = writeln!(s, "initial_state = {}", self.initial_state.to_toml());
        let _ = writeln!(s, "\n[network]");
        let _ = writeln!(s, "delay_coeff = {:?}", p.delay_coeff);
        let _ = writeln!(s, "mean_block_interval = {:?}", p.mean_block_interval);
        let _ = writeln!(s, "coinbase_reward = {:?}", p.coinbase_reward);
        let _ = writeln!(s, "fee_rate = {:?}", p.fee_rate);
        let _ = writeln!(s, "power_price = {:?}", p.power_price);
        let _ = writeln!(s, "population = {}", p.population);
        let _ = writeln!(s, "\n[pools]");
        let _ = writeln!(s, "omega = [{}]", list(&mut self.strategies.iter().map(|x| x.omega)));
        let _ = writeln!(s, "block_size = [{}]", list(&mut self.strategies.iter().map(|x| x.block_size)));
        let _ = writeln!(s, "\n[integrator]");
        let _ = writeln!(s, "step = {:?}", i.step);
        let _ = writeln!(s, "max_time = {:?}", i.max_time);
        let _ = writeln!(s, "convergence_tol = {:?}", i.convergence_tol);
        let _ = writeln!(s, "record_every = {}", i.record_every);
        let _ = writeln!(s, "\n[agents]");
        let _ = writeln!(s, "max_rounds = {}", a.max_rounds);
        let _ = writeln!(s, "rate_scale = {:?}", a.rate_scale);
        let _ = writeln!(s, "convergence_window = {}", a.convergence_window);
        let _ = writeln!(s, "convergence_tol = {:?}", a.convergence_tol);
        let _ = writeln!(s, "record_every = {}", a.record_every);
        let _ = writeln!(s, "parallel = {}", a.parallel);
        if let Some(sw) = &self.sweep {
            let _ = writeln!(s, "\n[sweep]");
            let _ = writeln!(s, "parameter = \"{}\"", sw.parameter.name());
            let _ = writeln!(s, "values = [{}]", list(&mut sw.values.iter().copied()));
        }
        s
    }
}

/// How a command run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

/// Files produced by a command, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, String>,
    pub status: Option<Status>,
    pub summary: Vec<String>,
}

impl Artifacts {
    fn add(&mut self, name: &str, content: String) {
        self.files.insert(name.to_string(), content);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn status(&self) -> Status {
        self.status.unwrap_or(Status::Converged)
    }

    fn note_convergence(&mut self, converged: bool) {
        if !converged {
            self.status = Some(Status::NotConverged);
        } else if self.status.is_none() {
            self.status = Some(Status::Converged);
        }
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn trajectory_csv(t: &Trajectory, comment: &[String]) -> Result<String> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf, comment)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Initial states for the two engines. Both start from the same point: a
/// random start draws the agents first and hands their empirical state to
/// the ODE.
fn initial_conditions(cfg: &ExperimentConfig, seed: u64) -> Result<(PopulationState, AgentPopulation)> {
    let m = cfg.strategies.len();
    let n = cfg.params.population as usize;
    match &cfg.initial_state {
        InitialState::Explicit(x) => Ok((x.clone(), AgentPopulation::from_state(n, x)?)),
        InitialState::Uniform => {
            let x = PopulationState::uniform(m);
            Ok((x.clone(), AgentPopulation::from_state(n, &x)?))
        }
        InitialState::Random(s) => {
            let pop = AgentPopulation::random(n, m, *s ^ seed)?;
            Ok((pop.state(), pop))
        }
    }
}

fn series_of_shares(t: &Trajectory, label: &str, style: Style) -> Vec<Series> {
    let m = t.states.first().map_or(0, |s| s.pools());
    (0..m)
        .map(|i| {
            Series::new(
                format!("{label} pool {}", i + 1),
                t.times.iter().zip(&t.states).map(|(&tt, x)| (tt, x[i])).collect(),
                style,
            )
        })
        .collect()
}

fn series_of_payoffs(t: &Trajectory, label: &str, style: Style) -> Vec<Series> {
    let Some(rows) = &t.payoffs else { return Vec::new() };
    let m = rows.first().map_or(0, |r| r.per_pool.len());
    (0..m)
        .map(|i| {
            Series::new(
                format!("{label} y{}", i + 1),
                t.times.iter().zip(rows).map(|(&tt, r)| (tt, r.per_pool[i])).collect(),
                style,
            )
        })
        .collect()
}

fn describe(x: &PopulationState) -> String {
    x.shares().iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
}

/// `evolve` (and `agents`, with the engine forced): trajectories of the
/// configured engines.
pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let game = cfg.game()?;
    let (x0, pop0) = initial_conditions(cfg, cfg.seed)?;
    let mut out = Artifacts::default();
    let mut share_chart = Chart::new(&format!("{}: population state", cfg.scenario), "time", "share of miners");
    let mut payoff_chart = Chart::new(&format!("{}: miner payoff", cfg.scenario), "time", "payoff");
    payoff_chart.zero_line = true;

    if cfg.engine.ode() {
        let run = integrate(&game, &x0, &cfg.integrator)?;
        let traj = run.trajectory.with_payoffs(&game);
        out.add("trajectory_ode.csv", trajectory_csv(&traj, &[])?);
        share_chart.series.extend(series_of_shares(&traj, "ode", Style::Line));
        payoff_chart.series.extend(series_of_payoffs(&traj, "ode", Style::Line));
        out.summary.push(format!(
            "ode: final state [{}] at t = {}, residual {:.3e}, converged = {}",
            describe(traj.last().expect("non-empty")),
            traj.times.last().expect("non-empty"),
            run.final_residual,
            run.converged
        ));
        out.note_convergence(run.converged);
    }
    if cfg.engine.agents() {
        let sim = agents::run(&game, pop0, &cfg.agents)?;
        let traj = sim.trajectory.clone().with_payoffs(&game);
        let comment = vec![format!(
            "seed={} rate_scale={} rng={} miners={} rounds={} converged={}",
            cfg.agents.seed,
            cfg.agents.rate_scale,
            RNG_ALGORITHM,
            cfg.params.population,
            sim.rounds,
            sim.converged
        )];
        out.add("trajectory_agents.csv", trajectory_csv(&traj, &comment)?);
        let style = if cfg.engine.ode() { Style::Dashed } else { Style::Line };
        share_chart.series.extend(series_of_shares(&traj, "agents", style));
        payoff_chart.series.extend(series_of_payoffs(&traj, "agents", style));
        out.summary.push(format!(
            "agents: final state [{}] after {} rounds, converged = {}",
            describe(&sim.final_state()),
            sim.rounds,
            sim.converged
        ));
        out.note_convergence(sim.converged);
    }
    out.add("trajectory.svg", share_chart.to_svg());
    out.add("payoffs.svg", payoff_chart.to_svg());
    Ok(out)
}

/// `agents`: `evolve` with the agent engine only.
pub fn cmd_agents(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut c = cfg.clone();
    c.engine = Engine::Agents;
    cmd_evolve(&c)
}

/// Classified rest points of a two-pool game (feasible ones only).
fn two_pool_reports(game: &PoolGame) -> Result<(Vec<RestPointReport>, Vec<String>)> {
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    for rp in stability::find_rest_points_two_pool(game)? {
        match rp.state() {
            Some(x) => reports.push(stability::classify(game, &x)?),
            None => notes.push(format!(
                "interior candidate x* = {} lies outside (0, 1) and is not a feasible rest point",
                fmt_sig(rp.x1)
            )),
        }
    }
    Ok((reports, notes))
}

/// `phase`: the reduced two-pool vector field, an overlaid trajectory and
/// the rest points.
pub fn cmd_phase(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let game = cfg.game()?;
    game.require_two_pools()?;
    let mut out = Artifacts::default();

    let grid: Vec<(f64, f64)> = (0..PHASE_GRID_POINTS)
        .map(|k| {
            let x = k as f64 / (PHASE_GRID_POINTS - 1) as f64;
            game.reduced_rhs_two_pool(x).map(|v| (x, v))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = grid.iter().map(|&(x, v)| vec![fmt_sig(x), fmt_sig(v)]).collect();
    out.add("phase_field.csv", csv_string(&["x_1".into(), "dx_1_dt".into()], &rows)?);

    let (x0, _) = initial_conditions(cfg, cfg.seed)?;
    let run = integrate(&game, &x0, &cfg.integrator)?;
    let traj_pts: Vec<(f64, f64, f64)> = run
        .trajectory
        .times
        .iter()
        .zip(&run.trajectory.states)
        .map(|(&t, x)| Ok((t, x[0], game.reduced_rhs_two_pool(x[0])?)))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = traj_pts.iter().map(|&(t, x, v)| vec![fmt_sig(t), fmt_sig(x), fmt_sig(v)]).collect();
    out.add(
        "phase_trajectory.csv",
        csv_string(&["t".into(), "x_1".into(), "dx_1_dt".into()], &rows)?,
    );
    out.note_convergence(run.converged);

    let (reports, notes) = two_pool_reports(&game)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![fmt_sig(r.x_star[0]), r.kind.to_string(), r.verdict.to_string()])
        .collect();
    out.add(
        "phase_rest_points.csv",
        csv_string(&["x_1".into(), "kind".into(), "verdict".into()], &rows)?,
    );
    out.summary.extend(notes);
    out.summary.push(format!(
        "{} rest points: {}",
        reports.len(),
        reports
            .iter()
            .map(|r| format!("x1 = {:.6} ({})", r.x_star[0], r.verdict))
            .collect::<Vec<_>>()
            .join(", ")
    ));

    let mut chart = Chart::new(&format!("{}: replicator dynamics", cfg.scenario), "x_1", "dx_1/dt")
        .series(Series::new("vector field", grid, Style::Line))
        .series(Series::new(
            "trajectory",
            traj_pts.iter().map(|&(_, x, v)| (x, v)).collect(),
            Style::Dashed,
        ))
        .series(Series::new(
            "rest points",
            reports.iter().map(|r| (r.x_star[0], 0.0)).collect(),
            Style::Markers,
        ));
    chart.zero_line = true;
    out.add("phase.svg", chart.to_svg());
    Ok(out)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// `closed_form`, `bisection` or `ode`.
    pub method: &'static str,
    pub interior_feasible: bool,
    pub x_star: PopulationState,
    pub payoffs: Vec<f64>,
    pub verdict: Option<Verdict>,
    pub converged: bool,
}

/// Equilibrium for one sweep point: the feasible interior rest point when
/// the two-pool closed form (or bisection) provides one, otherwise the state
/// the ODE settles in.
pub fn sweep_point(cfg: &ExperimentConfig, game: &PoolGame, value: f64, seed: u64) -> Result<SweepPoint> {
    if game.pools() == 2 {
        let (method, interior) = match stability::rest_points_two_pool(game) {
            Ok(pts) => ("closed_form", pts.into_iter().find(|p| p.kind == RestPointKind::Interior)),
            Err(Error::DegenerateStrategies(_)) => (
                "bisection",
                stability::interior_by_bisection(game, 1e-12)?.map(|x1| stability::RestPoint {
                    x1,
                    kind: RestPointKind::Interior,
                    feasible: true,
                }),
            ),
            Err(e) => return Err(e),
        };
        if let Some(x) = interior.and_then(|p| p.state()) {
            let report = stability::classify(game, &x)?;
            return Ok(SweepPoint {
                value,
                method,
                interior_feasible: true,
                payoffs: game.payoffs_extended(x.shares()),
                x_star: x,
                verdict: Some(report.verdict),
                converged: true,
            });
        }
    }
    let (x0, _) = initial_conditions(cfg, seed)?;
    let icfg = IntegratorConfig {
        convergence_tol: cfg.integrator.convergence_tol.min(stability::REST_TOL),
        ..cfg.integrator
    };
    let run = integrate(game, &x0, &icfg)?;
    let x = snap_to_vertex(run.final_state());
    let verdict = if run.converged {
        Some(stability::classify(game, &x)?.verdict)
    } else {
        None
    };
    Ok(SweepPoint {
        value,
        method: "ode",
        interior_feasible: false,
        payoffs: game.payoffs_extended(x.shares()),
        x_star: x,
        verdict,
        converged: run.converged,
    })
}

/// Distance below which a settled state is reported as the vertex it
/// approaches.
pub const VERTEX_SNAP: f64 = 1e-6;

fn snap_to_vertex(x: &PopulationState) -> PopulationState {
    let (best, share) = x
        .shares()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if 1.0 - share < VERTEX_SNAP {
        PopulationState::vertex(x.pools(), best)
    } else {
        x.clone()
    }
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| config_err("sweep", "the sweep command needs a [sweep] section"))?;
    sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut params = cfg.params;
            sweep.parameter.apply(&mut params, v)?;
            let game = PoolGame::new(cfg.strategies.clone(), params)?;
            sweep_point(cfg, &game, v, cfg.seed ^ k as u64)
        })
        .collect()
}

/// `sweep`: equilibrium against one network parameter.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let points = run_sweep(cfg)?;
    let sweep = cfg.sweep.as_ref().expect("validated by run_sweep");
    let m = cfg.strategies.len();
    let mut out = Artifacts::default();

    let mut header = vec!["parameter".to_string(), "value".into(), "method".into(), "interior_feasible".into()];
    header.extend((1..=m).map(|i| format!("x_star_{i}")));
    header.extend((1..=m).map(|i| format!("y_{i}")));
    header.push("verdict".into());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = vec![
                sweep.parameter.name().to_string(),
                fmt_sig(p.value),
                p.method.to_string(),
                p.interior_feasible.to_string(),
            ];
            r.extend(p.x_star.shares().iter().map(|&v| fmt_sig(v)));
            r.extend(p.payoffs.iter().map(|&v| fmt_sig(v)));
            r.push(p.verdict.map_or_else(|| "unclassified".to_string(), |v| v.to_string()));
            r
        })
        .collect();
    out.add("sweep.csv", csv_string(&header, &rows)?);

    let name = sweep.parameter.name();
    let mut states = Chart::new(&format!("{}: equilibrium vs {name}", cfg.scenario), name, "share of miners");
    let mut pay = Chart::new(&format!("{}: payoff at equilibrium vs {name}", cfg.scenario), name, "payoff");
    pay.zero_line = true;
    for i in 0..m {
        states.series.push(Series::new(
            format!("pool {}", i + 1),
            points.iter().map(|p| (p.value, p.x_star[i])).collect(),
            Style::Line,
        ));
        pay.series.push(Series::new(
            format!("y{}", i + 1),
            points.iter().map(|p| (p.value, p.payoffs[i])).collect(),
            Style::Line,
        ));
    }
    out.add("sweep_states.svg", states.to_svg());
    out.add("sweep_payoffs.svg", pay.to_svg());
    for p in &points {
        if !p.interior_feasible {
            out.summary.push(format!("{name} = {}: no feasible interior rest point, recorded ODE outcome", p.value));
        }
        out.note_convergence(p.converged);
    }
    out.summary.push(format!("{} grid points", points.len()));
    Ok(out)
}

/// Rest points found for `classify`: the two-pool closed form, or for more
/// pools every vertex plus the state the ODE settles in.
pub fn classify_all(cfg: &ExperimentConfig) -> Result<(Vec<RestPointReport>, Vec<String>, bool)> {
    cfg.validate()?;
    let game = cfg.game()?;
    if game.pools() == 2 {
        let (r, n) = two_pool_reports(&game)?;
        return Ok((r, n, true));
    }
    let m = game.pools();
    let mut reports = (0..m)
        .map(|i| stability::classify(&game, &PopulationState::vertex(m, i)))
        .collect::<Result<Vec<_>>>()?;
    let (x0, _) = initial_conditions(cfg, cfg.seed)?;
    let icfg = IntegratorConfig {
        convergence_tol: REFINE_TOL,
        max_time: cfg.integrator.max_time.max(1e5),
        ..cfg.integrator
    };
    let run = integrate(&game, &x0, &icfg)?;
    let mut notes = Vec::new();
    let x = run.final_state();
    if run.final_residual < stability::REST_TOL {
        if !x.is_vertex() {
            reports.push(stability::classify(&game, x)?);
        }
    } else {
        notes.push(format!("ODE from the initial state did not reach a rest point (residual {:.3e})", run.final_residual));
    }
    Ok((reports, notes, run.final_residual < stability::REST_TOL))
}

/// `classify`: equilibrium table and key-value reports.
pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (reports, notes, converged) = classify_all(cfg)?;
    let mut out = Artifacts::default();
    let m = cfg.strategies.len();
    let rows: Vec<Vec<String>> = reports.iter().map(RestPointReport::csv_row).collect();
    out.add("equilibria.csv", csv_string(&RestPointReport::csv_header(m), &rows)?);
    let mut kv = Vec::new();
    for (k, r) in reports.iter().enumerate() {
        if k > 0 {
            kv.push(b'\n');
        }
        kv.extend_from_slice(format!("[rest_point.{}]\n", k + 1).as_bytes());
        r.write_key_values(&mut kv)?;
    }
    out.add("equilibria.txt", String::from_utf8(kv).expect("utf-8"));
    out.summary.extend(notes);
    for r in &reports {
        out.summary.push(format!(
            "[{}] {} -> {}{}",
            describe(&r.x_star),
            r.kind,
            r.verdict,
            if r.printed_conditions_disagree { " (closed-form conditions disagree)" } else { "" }
        ));
    }
    out.note_convergence(converged);
    Ok(out)
}

/// Draws a point uniformly from the simplex.
pub fn random_state(pools: usize, seed: u64) -> PopulationState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..pools).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    PopulationState::normalized(e).expect("positive weights")
}

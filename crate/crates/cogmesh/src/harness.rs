//! Episode and experiment orchestration: seeded runs, multi-episode
//! averaging, metric extraction, and parameter sweeps.
//!
//! Determinism contract: a (scenario, base seed) pair produces bit-identical
//! metrics across runs and across thread counts. Episodes are independent
//! given their seeds; aggregation always folds in episode order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learning::{
    algorithm_slot, Agent, ConjectureInit, ConjectureMode, LearnParams, SlotRecord, UpdateRule,
};
use crate::oracle::JointRewardTable;
use crate::radio::{
    generate_topology, observe_state, power_level, pu_gain_column, pu_interference, sinr,
    ChannelParams, GeometryConfig, RadioParams,
};

/// RNG stream ids derived from one episode seed. Topology generation uses
/// the default stream of its own seed.
const STREAM_ENV: u64 = 1;
const STREAM_AGENT_BASE: u64 = 2;

/// Episodes processed per deterministic aggregation batch. Fixed so that the
/// fold order cannot depend on the thread count.
const EPISODE_BATCH: usize = 32;

/// Whether every episode redraws the deployment or all episodes share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyPolicy {
    PerEpisode,
    Fixed,
}

/// Parameters the sweep operation recognizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Alpha0,
    Kappa,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tau" => Ok(SweepParam::Tau),
            "alpha0" => Ok(SweepParam::Alpha0),
            "kappa" => Ok(SweepParam::Kappa),
            other => Err(Error::config(
                "sweep.param",
                format!("unknown sweep parameter `{other}` (expected tau, alpha0, or kappa)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Alpha0 => "alpha0",
            SweepParam::Kappa => "kappa",
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub num_su: usize,
    pub num_pu: usize,
    pub geometry: GeometryConfig,
    pub channel: ChannelParams,
    pub radio: RadioParams,
    pub learn: LearnParams,
    pub conjecture_mode: ConjectureMode,
    pub conjecture_init: ConjectureInit,
    pub conjecture_omega: f64,
    pub history_window: usize,
    pub episode_length: usize,
    pub num_episodes: usize,
    pub topology_policy: TopologyPolicy,
    /// Final fraction of slots over which converged metrics are summarized.
    pub tail_fraction: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.num_su == 0 {
            return Err(Error::config("num_su", "must be >= 1"));
        }
        if self.radio.su.len() != self.num_su {
            return Err(Error::config(
                "su_params",
                format!(
                    "expected {} per-SU entries, got {}",
                    self.num_su,
                    self.radio.su.len()
                ),
            ));
        }
        self.geometry.validate()?;
        self.channel.validate()?;
        self.radio.validate()?;
        self.learn.validate()?;
        if !(self.conjecture_omega > 0.0) {
            return Err(Error::config("conjecture_omega", "must be > 0"));
        }
        if self.history_window == 0 {
            return Err(Error::config("history_window", "must be >= 1"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("episode_length", "must be >= 1"));
        }
        if self.num_episodes == 0 {
            return Err(Error::config("num_episodes", "must be >= 1"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::config("tail_fraction", "must be within (0, 1]"));
        }
        Ok(())
    }

    fn action_counts(&self) -> Vec<usize> {
        self.radio.su.iter().map(|s| s.levels).collect()
    }

    fn build_agents(&self, episode_seed: u64) -> Result<Vec<Agent>> {
        let counts = self.action_counts();
        (0..self.num_su)
            .map(|i| {
                let su = &self.radio.su[i];
                let m = su.levels - 1;
                let power_levels: Vec<f64> = (0..=m)
                    .map(|a| power_level(a, m, su.p_min_w, self.radio.p_max_eff(i)))
                    .collect::<Result<_>>()?;
                let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
                rng.set_stream(STREAM_AGENT_BASE + i as u64);
                Ok(Agent::new(
                    i,
                    &counts,
                    self.learn,
                    self.conjecture_mode,
                    self.conjecture_init,
                    self.conjecture_omega,
                    self.history_window,
                    power_levels,
                    su.qos_sinr,
                    rng,
                ))
            })
            .collect()
    }
}

/// Per-slot, per-agent metrics of one episode or of an episode average.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub episodes: usize,
    pub num_agents: usize,
    pub episode_length: usize,
    /// Exact expected realized reward of the slot-start strategy profile.
    pub expected: Vec<f64>,
    pub realized: Vec<f64>,
    pub action: Vec<f64>,
    pub qos: Vec<f64>,
    /// Conjecture value used in the slot's Q-backup at the visited pair.
    pub conjecture: Vec<f64>,
    /// Per-agent activity-averaged exhaustive optimum (episode-averaged).
    pub optimum: Vec<f64>,
    /// Conjecture revisions that hit the [0, 1] clamp, summed over agents
    /// and episodes.
    pub clamp_events: u64,
}

impl MetricSeries {
    fn zeros(num_agents: usize, episode_length: usize) -> Self {
        let len = num_agents * episode_length;
        MetricSeries {
            episodes: 1,
            num_agents,
            episode_length,
            expected: vec![0.0; len],
            realized: vec![0.0; len],
            action: vec![0.0; len],
            qos: vec![0.0; len],
            conjecture: vec![0.0; len],
            optimum: vec![0.0; num_agents],
            clamp_events: 0,
        }
    }

    #[inline]
    pub fn idx(&self, slot: usize, agent: usize) -> usize {
        slot * self.num_agents + agent
    }

    /// First slot of the tail window for the given fraction.
    pub fn tail_start(&self, tail_fraction: f64) -> usize {
        let count = ((self.episode_length as f64 * tail_fraction).ceil() as usize)
            .clamp(1, self.episode_length);
        self.episode_length - count
    }

    /// Mean expected reward of one agent over the tail window.
    pub fn tail_mean_expected(&self, agent: usize, tail_fraction: f64) -> f64 {
        let start = self.tail_start(tail_fraction);
        let slots = self.episode_length - start;
        (start..self.episode_length)
            .map(|t| self.expected[self.idx(t, agent)])
            .sum::<f64>()
            / slots as f64
    }

    /// Mean and variance of the per-slot expected reward over the tail.
    pub fn tail_expected_stats(&self, agent: usize, tail_fraction: f64) -> (f64, f64) {
        let start = self.tail_start(tail_fraction);
        let values: Vec<f64> = (start..self.episode_length)
            .map(|t| self.expected[self.idx(t, agent)])
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        (mean, var)
    }

    /// Tail variance of the realized reward of one agent.
    pub fn tail_realized_variance(&self, agent: usize, tail_fraction: f64) -> f64 {
        let start = self.tail_start(tail_fraction);
        let values: Vec<f64> = (start..self.episode_length)
            .map(|t| self.realized[self.idx(t, agent)])
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
    }

    fn accumulate(&mut self, other: &MetricSeries) {
        debug_assert_eq!(self.num_agents, other.num_agents);
        debug_assert_eq!(self.episode_length, other.episode_length);
        for (a, b) in self.expected.iter_mut().zip(&other.expected) {
            *a += b;
        }
        for (a, b) in self.realized.iter_mut().zip(&other.realized) {
            *a += b;
        }
        for (a, b) in self.action.iter_mut().zip(&other.action) {
            *a += b;
        }
        for (a, b) in self.qos.iter_mut().zip(&other.qos) {
            *a += b;
        }
        for (a, b) in self.conjecture.iter_mut().zip(&other.conjecture) {
            *a += b;
        }
        for (a, b) in self.optimum.iter_mut().zip(&other.optimum) {
            *a += b;
        }
        self.clamp_events += other.clamp_events;
    }

    fn finish_average(&mut self, episodes: usize) {
        let inv = 1.0 / episodes as f64;
        for v in self
            .expected
            .iter_mut()
            .chain(&mut self.realized)
            .chain(&mut self.action)
            .chain(&mut self.qos)
            .chain(&mut self.conjecture)
            .chain(&mut self.optimum)
        {
            *v *= inv;
        }
        self.episodes = episodes;
    }
}

/// Slot-level view passed to observers: slot-start strategy rows at each
/// agent's current state, the exact expected rewards of that profile, and
/// the transition records of the slot.
pub struct SlotView<'a> {
    pub slot: usize,
    pub strategy_rows: &'a [Vec<f64>],
    pub expected: &'a [f64],
    pub records: &'a [SlotRecord],
}

fn draw_pu_pattern(rng: &mut ChaCha8Rng, num_pu: usize, activity: f64) -> Vec<bool> {
    // One uniform per PU per slot, consumed regardless of the activity value
    // so that activity sweeps sharing a base seed stay coupled.
    (0..num_pu)
        .map(|_| rng.random::<f64>() < activity)
        .collect()
}

/// Runs one episode with an observer hooked into every slot.
pub fn run_episode_observed(
    scenario: &Scenario,
    seed: u64,
    rule: UpdateRule,
    mut observer: impl FnMut(&SlotView),
) -> Result<MetricSeries> {
    run_episode_inner(scenario, seed, seed, rule, &mut |view| observer(view))
}

/// Runs one episode of the private-information learner.
pub fn run_episode(scenario: &Scenario, seed: u64) -> Result<MetricSeries> {
    run_episode_inner(scenario, seed, seed, UpdateRule::Conjecture, &mut |_| {})
}

/// Runs one episode under an explicit update rule (oracle wirings included).
pub fn run_episode_with_rule(
    scenario: &Scenario,
    seed: u64,
    rule: UpdateRule,
) -> Result<MetricSeries> {
    run_episode_inner(scenario, seed, seed, rule, &mut |_| {})
}

fn run_episode_inner(
    scenario: &Scenario,
    episode_seed: u64,
    topology_seed: u64,
    rule: UpdateRule,
    observer: &mut dyn FnMut(&SlotView),
) -> Result<MetricSeries> {
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        topology_seed,
        &scenario.channel,
        &scenario.geometry,
    )?;
    let table = JointRewardTable::build(&topo, &scenario.radio)?;
    let mut agents = scenario.build_agents(episode_seed)?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(episode_seed);
    env_rng.set_stream(STREAM_ENV);

    // Initial states are evaluated from a probe slot in which every SU
    // transmits at its lowest level.
    let probe_pattern = draw_pu_pattern(&mut env_rng, scenario.num_pu, scenario.radio.pu_activity);
    let probe_powers: Vec<f64> = agents.iter().map(|a| a.power_levels[0]).collect();
    for (i, agent) in agents.iter_mut().enumerate() {
        let gains = pu_gain_column(&topo, i);
        let phi = pu_interference(&probe_pattern, &gains, scenario.radio.pu_power_w);
        let gamma = sinr(i, &probe_powers, &topo, phi, scenario.radio.noise_w);
        agent.set_state(observe_state(i, gamma, agent.qos_sinr, 0));
    }

    let mut series = MetricSeries::zeros(scenario.num_su, scenario.episode_length);
    for t in 0..scenario.episode_length {
        let pu_active =
            draw_pu_pattern(&mut env_rng, scenario.num_pu, scenario.radio.pu_activity);

        let rows: Vec<Vec<f64>> = agents
            .iter()
            .map(|a| a.strategy.row(a.state_index()).to_vec())
            .collect();
        let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let expected = table.expected_rewards(&row_refs);

        let records = algorithm_slot(
            &mut agents,
            &topo,
            &scenario.radio,
            &pu_active,
            t as u64,
            rule,
        );

        for rec in &records {
            let k = series.idx(t, rec.agent);
            series.expected[k] = expected[rec.agent];
            series.realized[k] = rec.reward;
            series.action[k] = rec.action as f64;
            series.qos[k] = rec.qos_ok as u8 as f64;
            series.conjecture[k] = rec.conjecture;
        }
        observer(&SlotView {
            slot: t,
            strategy_rows: &rows,
            expected: &expected,
            records: &records,
        });
    }

    series.optimum = table.kappa_averaged_optimum();
    series.clamp_events = agents.iter().map(|a| a.conjecture.clamp_events()).sum();
    Ok(series)
}

/// Averages per-slot metrics over `num_episodes` independent seeded episodes
/// (episode k uses seed `base_seed + k`).
pub fn run_experiment(scenario: &Scenario, base_seed: u64, threads: usize) -> Result<MetricSeries> {
    run_experiment_with_rule(scenario, base_seed, threads, UpdateRule::Conjecture)
}

pub fn run_experiment_with_rule(
    scenario: &Scenario,
    base_seed: u64,
    threads: usize,
    rule: UpdateRule,
) -> Result<MetricSeries> {
    scenario.validate()?;
    let episodes = scenario.num_episodes;
    let episode_of = |k: usize| -> Result<MetricSeries> {
        let episode_seed = base_seed.wrapping_add(k as u64);
        let topology_seed = match scenario.topology_policy {
            TopologyPolicy::PerEpisode => episode_seed,
            TopologyPolicy::Fixed => base_seed,
        };
        run_episode_inner(scenario, episode_seed, topology_seed, rule, &mut |_| {})
    };

    let mut acc = MetricSeries::zeros(scenario.num_su, scenario.episode_length);
    if threads <= 1 {
        for k in 0..episodes {
            acc.accumulate(&episode_of(k)?);
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        // Fixed-size batches keep memory bounded and the fold order
        // independent of scheduling.
        let mut start = 0;
        while start < episodes {
            let end = (start + EPISODE_BATCH).min(episodes);
            let batch: Vec<Result<MetricSeries>> =
                pool.install(|| (start..end).into_par_iter().map(episode_of).collect());
            for result in batch {
                acc.accumulate(&result?);
            }
            start = end;
        }
    }
    acc.finish_average(episodes);
    Ok(acc)
}

/// One sweep point: the parameter value and the averaged series it produced.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub series: MetricSeries,
}

/// Runs one experiment per parameter value with a shared base seed, so the
/// runs are coupled episode-by-episode.
pub fn sweep(
    scenario: &Scenario,
    param: SweepParam,
    values: &[f64],
    base_seed: u64,
    threads: usize,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "must not be empty"));
    }
    values
        .iter()
        .map(|&value| {
            let mut s = scenario.clone();
            match param {
                SweepParam::Tau => s.learn.tau = value,
                SweepParam::Alpha0 => s.learn.alpha0 = value,
                SweepParam::Kappa => s.radio.pu_activity = value,
            }
            s.validate()?;
            Ok(SweepPoint {
                value,
                series: run_experiment(&s, base_seed, threads)?,
            })
        })
        .collect()
}

/// Per-agent optimality gap over the tail window:
/// `1 - tail_mean(expected) / optimum`, zero when the optimum itself is zero
/// (nothing is achievable, so nothing is lost).
pub fn optimality_gap(series: &MetricSeries, tail_fraction: f64) -> Vec<f64> {
    (0..series.num_agents)
        .map(|i| {
            let opt = series.optimum[i];
            if opt > 0.0 {
                1.0 - series.tail_mean_expected(i, tail_fraction) / opt
            } else {
                0.0
            }
        })
        .collect()
}

/// First slot at which the agent's expected reward reaches `level_frac` of
/// its own tail mean; `None` if it never does.
pub fn convergence_slot(
    series: &MetricSeries,
    agent: usize,
    level_frac: f64,
    tail_fraction: f64,
) -> Option<usize> {
    let target = level_frac * series.tail_mean_expected(agent, tail_fraction);
    (0..series.episode_length).find(|&t| series.expected[series.idx(t, agent)] >= target)
}

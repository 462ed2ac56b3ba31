//! Tabular learning machinery: Q-tables, Boltzmann strategies, conjecture
//! estimation and revision, and the per-slot update loop.
//!
//! Each agent learns from private information only: its own state, its own
//! strategy, and the rewards it collects. The conjecture is a scalar estimate
//! of the product of all other agents' probabilities of their current
//! actions; two reference update rules with full knowledge of the other
//! agents (exact product, full information) exist for oracle comparisons.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::radio::{
    observe_state, pu_gain_column, pu_interference, realized_reward_raw, sinr, AgentState,
    RadioParams, Topology,
};

/// Dense per-agent Q-table indexed by (state index, action index).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        QTable {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    /// Maximum Q-value over the actions of one state. Ties need no index
    /// tie-breaking here: the max of equals is the shared value.
    pub fn max_row(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sup-norm distance to another table of identical shape.
    pub fn sup_distance(&self, other: &QTable) -> Option<f64> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Per-state mixed strategy: one probability row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Strategy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Strategy {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn set_row(&mut self, state: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.num_actions);
        let start = state * self.num_actions;
        self.probs[start..start + self.num_actions].copy_from_slice(row);
    }
}

/// Exponent floor keeping softmax outputs strictly positive: exp(-700) is
/// still a normal f64, while exp of anything much lower underflows to zero.
const SOFTMAX_EXP_FLOOR: f64 = -700.0;

pub(crate) fn softmax_into(q_row: &[f64], tau: f64, out: &mut Vec<f64>) {
    debug_assert!(tau > 0.0);
    debug_assert!(!q_row.is_empty());
    let max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    let mut sum = 0.0;
    for &q in q_row {
        let e = (((q - max) / tau).max(SOFTMAX_EXP_FLOOR)).exp();
        sum += e;
        out.push(e);
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
}

/// Boltzmann strategy over one Q-row: `pi(a) = exp(Q(a)/tau) / sum_b exp(Q(b)/tau)`,
/// computed with max-subtraction so large Q-values cannot overflow.
pub fn boltzmann_strategy(q_row: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if q_row.is_empty() {
        return Err(Error::Domain("empty Q-row".into()));
    }
    if q_row.iter().any(|q| !q.is_finite()) {
        return Err(Error::Domain("non-finite Q-value in row".into()));
    }
    let mut out = Vec::with_capacity(q_row.len());
    softmax_into(q_row, tau, &mut out);
    Ok(out)
}

/// Slot-indexed learning rate `alpha0 / theta^t`.
pub fn learning_rate(t: u64, alpha0: f64, theta: f64) -> f64 {
    alpha0 / theta.powf(t as f64)
}

/// Samples an action index from a probability row using one uniform draw.
pub fn sample_from_row(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (a, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    row.len() - 1
}

/// Linear conjecture revision against reference points: the new conjecture
/// moves opposite to the agent's own strategy deviation, clamped to [0, 1]
/// since it stands for a product of probabilities.
pub fn update_conjecture(c_prev: f64, pi_new: f64, pi_prev: f64, omega: f64) -> f64 {
    debug_assert!(omega > 0.0);
    (c_prev - omega * (pi_new - pi_prev)).clamp(0.0, 1.0)
}

/// Conjecture estimate from the reward recurrence statistics:
/// `1 / ((1 + mean_gap) * pi)`, clamped to [0, 1]. `mean_gap` is the mean
/// number of slots strictly between recurrences of the same realized reward.
pub fn estimate_conjecture_from_history(
    mean_gap: Option<f64>,
    pi: f64,
    neutral_prior: f64,
) -> f64 {
    match mean_gap {
        Some(gap) => {
            debug_assert!(pi > 0.0);
            (1.0 / ((1.0 + gap) * pi)).clamp(0.0, 1.0)
        }
        None => neutral_prior,
    }
}

/// Standard single-agent Q-learning backup.
pub fn q_update_single_agent(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    alpha: f64,
    beta: f64,
) {
    debug_assert!((0.0..=1.0).contains(&alpha));
    let max_next = q.max_row(next_state);
    let updated = (1.0 - alpha) * q.get(state, action) + alpha * (reward + beta * max_next);
    q.set(state, action, updated);
}

/// Conjecture-weighted backup: the reward is discounted by the agent's
/// estimate of the other agents' joint action probability.
pub fn q_update_conjecture(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    conjecture: f64,
    next_state: usize,
    alpha: f64,
    beta: f64,
) {
    debug_assert!((0.0..=1.0).contains(&alpha));
    let max_next = q.max_row(next_state);
    let updated =
        (1.0 - alpha) * q.get(state, action) + alpha * (conjecture * reward + beta * max_next);
    q.set(state, action, updated);
}

/// Full-information multi-agent backup: the reward is weighted by the exact
/// product of the other agents' probabilities of their realized actions.
/// Testing/oracle wiring only; a deployed agent cannot observe those.
pub fn q_update_full_info(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    others_probs: &[f64],
    next_state: usize,
    alpha: f64,
    beta: f64,
) {
    let product: f64 = others_probs.iter().product();
    q_update_conjecture(q, state, action, reward, product, next_state, alpha, beta);
}

/// Sliding-window record of realized-reward recurrences per (state, action).
///
/// Rewards are deterministic functions of the discrete joint action (plus the
/// PU pattern) once gains are frozen, so exact recurrence is well defined;
/// a small relative tolerance absorbs float noise when matching values.
#[derive(Debug, Clone)]
pub struct RewardHistory {
    num_actions: usize,
    window: usize,
    rel_tol: f64,
    cells: Vec<HistoryCell>,
}

#[derive(Debug, Clone, Default)]
struct HistoryCell {
    /// Distinct reward values with the slot of their last occurrence.
    values: Vec<(f64, u64)>,
    /// Most recent recurrence gaps (slots strictly between occurrences).
    gaps: VecDeque<u64>,
}

impl RewardHistory {
    pub fn new(num_states: usize, num_actions: usize, window: usize) -> Self {
        RewardHistory {
            num_actions,
            window: window.max(1),
            rel_tol: 1e-9,
            cells: vec![HistoryCell::default(); num_states * num_actions],
        }
    }

    fn cell_index(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    /// Records that `(state, action)` was played at `slot` yielding `value`.
    pub fn record(&mut self, state: usize, action: usize, slot: u64, value: f64) {
        let rel_tol = self.rel_tol;
        let window = self.window;
        let idx = self.cell_index(state, action);
        let cell = &mut self.cells[idx];
        let matched = cell
            .values
            .iter_mut()
            .find(|(v, _)| (*v - value).abs() <= rel_tol * v.abs().max(value.abs()));
        match matched {
            Some((_, last_slot)) => {
                let gap = slot - *last_slot - 1;
                *last_slot = slot;
                if cell.gaps.len() == window {
                    cell.gaps.pop_front();
                }
                cell.gaps.push_back(gap);
            }
            None => {
                // Bound the distinct-value list: evict the stalest value.
                if cell.values.len() == window {
                    let oldest = cell
                        .values
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, (_, s))| *s)
                        .map(|(i, _)| i)
                        .expect("non-empty");
                    cell.values.swap_remove(oldest);
                }
                cell.values.push((value, slot));
            }
        }
    }

    /// Mean recurrence gap at `(state, action)`, or `None` before the first
    /// recurrence.
    pub fn mean_gap(&self, state: usize, action: usize) -> Option<f64> {
        let cell = &self.cells[self.cell_index(state, action)];
        if cell.gaps.is_empty() {
            return None;
        }
        Some(cell.gaps.iter().map(|g| *g as f64).sum::<f64>() / cell.gaps.len() as f64)
    }

    /// Conjecture estimate at `(state, action)` given the agent's own current
    /// probability of that action; falls back to `neutral_prior` while the
    /// history is empty.
    pub fn conjecture_estimate(
        &self,
        state: usize,
        action: usize,
        pi: f64,
        neutral_prior: f64,
    ) -> f64 {
        estimate_conjecture_from_history(self.mean_gap(state, action), pi, neutral_prior)
    }
}

/// Per-(state, action) conjecture state: the current estimate (which doubles
/// as the reference conjecture for the next revision), the reference
/// strategy probability, and the revision slope `omega`.
#[derive(Debug, Clone)]
pub struct Conjecture {
    values: QTable,
    pi_ref: QTable,
    omega: QTable,
    clamp_events: u64,
}

impl Conjecture {
    pub fn new(num_states: usize, num_actions: usize, initial: f64, omega: f64) -> Self {
        let mut values = QTable::zeros(num_states, num_actions);
        values.as_mut_slice().fill(initial);
        let mut pi_ref = QTable::zeros(num_states, num_actions);
        pi_ref.as_mut_slice().fill(1.0 / num_actions as f64);
        let mut omega_t = QTable::zeros(num_states, num_actions);
        omega_t.as_mut_slice().fill(omega);
        Conjecture {
            values,
            pi_ref,
            omega: omega_t,
            clamp_events: 0,
        }
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values.get(state, action)
    }

    pub fn set_value(&mut self, state: usize, action: usize, value: f64) {
        self.values.set(state, action, value);
    }

    pub fn omega(&self, state: usize, action: usize) -> f64 {
        self.omega.get(state, action)
    }

    /// Number of revisions that hit the [0, 1] clamp so far.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Revises the conjecture at a visited pair. `pi_slot_start` is the
    /// probability the action had while it was chosen (the reference point),
    /// `pi_new` the probability after the strategy update.
    pub fn revise(&mut self, state: usize, action: usize, pi_slot_start: f64, pi_new: f64) -> f64 {
        let omega = self.omega.get(state, action);
        let c_prev = self.values.get(state, action);
        let raw = c_prev - omega * (pi_new - pi_slot_start);
        let clamped = raw.clamp(0.0, 1.0);
        if raw != clamped {
            self.clamp_events += 1;
        }
        self.values.set(state, action, clamped);
        self.pi_ref.set(state, action, pi_new);
        clamped
    }
}

/// How a learning agent forms the conjecture used in its Q-backup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjectureMode {
    /// Linear revision against the previous slot's reference points.
    Linear,
    /// Estimate from reward-recurrence statistics each slot.
    History,
    /// Linear revision, re-anchored from the reward history every
    /// `history_window` slots.
    Hybrid,
}

/// Initial conjecture value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjectureInit {
    /// `1 / (m_i + 1)`: requires no knowledge of the other agents.
    Neutral,
    /// Product of uniform choice probabilities over all other agents,
    /// available when the harness knows the whole population.
    ProductUniform,
}

/// Learning hyperparameters shared by the agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    /// Discount factor in [0, 1).
    pub beta: f64,
    /// Boltzmann temperature, > 0.
    pub tau: f64,
    /// Initial learning rate in [0, 1).
    pub alpha0: f64,
    /// Learning-rate decay base, > 1; the rate at slot t is alpha0 / theta^t.
    pub theta: f64,
    /// Floor keeping the decayed rate from freezing the learner.
    pub alpha_min: f64,
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config("learn.beta", "must be within [0, 1)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("learn.tau", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.alpha0) {
            return Err(Error::config("learn.alpha0", "must be within [0, 1)"));
        }
        if !(self.theta > 1.0) {
            return Err(Error::config("learn.theta", "must be > 1"));
        }
        if !(0.0..1.0).contains(&self.alpha_min) {
            return Err(Error::config("learn.alpha_min", "must be within [0, 1)"));
        }
        Ok(())
    }
}

/// Which update rule drives the per-slot learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// The private-information conjecture learner (deployable).
    Conjecture,
    /// Conjecture wired to the exact product of the other agents' slot-start
    /// probabilities (oracle wiring).
    ExactProduct,
    /// The full-information multi-agent rule (oracle wiring).
    FullInformation,
}

/// One learning agent: its tables, its state, and its private RNG stream.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    num_actions: usize,
    pub learn: LearnParams,
    pub mode: ConjectureMode,
    history_window: usize,
    pub q: QTable,
    pub strategy: Strategy,
    pub conjecture: Conjecture,
    pub history: RewardHistory,
    state: AgentState,
    rng: ChaCha8Rng,
    /// Discrete transmit power per action, watts.
    pub power_levels: Vec<f64>,
    pub qos_sinr: f64,
    scratch_row: Vec<f64>,
}

impl Agent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        action_counts: &[usize],
        learn: LearnParams,
        mode: ConjectureMode,
        init: ConjectureInit,
        omega: f64,
        history_window: usize,
        power_levels: Vec<f64>,
        qos_sinr: f64,
        rng: ChaCha8Rng,
    ) -> Agent {
        let num_actions = action_counts[id];
        debug_assert_eq!(num_actions, power_levels.len());
        let num_states = AgentState::count(num_actions);
        let initial_c = match init {
            ConjectureInit::Neutral => 1.0 / num_actions as f64,
            ConjectureInit::ProductUniform => action_counts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != id)
                .map(|(_, n)| 1.0 / *n as f64)
                .product(),
        };
        Agent {
            id,
            num_actions,
            learn,
            mode,
            history_window,
            q: QTable::zeros(num_states, num_actions),
            strategy: Strategy::uniform(num_states, num_actions),
            conjecture: Conjecture::new(num_states, num_actions, initial_c, omega),
            history: RewardHistory::new(num_states, num_actions, history_window),
            state: AgentState {
                agent: id,
                qos_ok: false,
                action: 0,
            },
            rng,
            power_levels,
            qos_sinr,
            scratch_row: Vec::with_capacity(num_actions),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn state(&self) -> AgentState {
        self.state
    }

    pub fn set_state(&mut self, state: AgentState) {
        debug_assert_eq!(state.agent, self.id);
        self.state = state;
    }

    pub fn state_index(&self) -> usize {
        self.state.index(self.num_actions)
    }

    /// Samples an action from the strategy row of the current state using
    /// the agent's own RNG stream.
    pub fn sample_action(&mut self) -> usize {
        let s = self.state_index();
        let u = self.rng.random::<f64>();
        sample_from_row(self.strategy.row(s), u)
    }

    /// Decayed learning rate with the configured floor; an all-zero schedule
    /// stays zero.
    pub fn effective_alpha(&self, t: u64) -> f64 {
        let floor = self.learn.alpha_min.min(self.learn.alpha0);
        learning_rate(t, self.learn.alpha0, self.learn.theta).max(floor)
    }

    fn refresh_strategy_row(&mut self, state: usize) {
        let mut row = std::mem::take(&mut self.scratch_row);
        softmax_into(self.q.row(state), self.learn.tau, &mut row);
        self.strategy.set_row(state, &row);
        self.scratch_row = row;
    }
}

/// Everything recorded about one agent in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub agent: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// The conjecture value used in this slot's Q-backup.
    pub conjecture: f64,
    pub qos_ok: bool,
    pub sinr: f64,
    pub power_w: f64,
}

/// Slot-start view of one agent, captured before any update so that the
/// later sequential processing cannot leak information between agents.
#[derive(Debug, Clone, Copy)]
struct SlotSnapshot {
    action: usize,
    /// Probability the agent's strategy assigned to the action it chose.
    prob: f64,
}

fn others_probs(snapshots: &[SlotSnapshot], except: usize) -> Vec<f64> {
    snapshots
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != except)
        .map(|(_, s)| s.prob)
        .collect()
}

/// Executes one time slot of the learning game: simultaneous action choice
/// from the slot-start strategies, joint SINR evaluation under the given PU
/// pattern, reward assignment (zero on QoS failure), and per-agent Q,
/// strategy, conjecture, and state updates.
///
/// The PU pattern is drawn by the caller so that experiment-level seed
/// sharing can couple the draws across parameter sweeps.
pub fn algorithm_slot(
    agents: &mut [Agent],
    topo: &Topology,
    radio: &RadioParams,
    pu_active: &[bool],
    t: u64,
    rule: UpdateRule,
) -> Vec<SlotRecord> {
    let n = agents.len();
    debug_assert_eq!(n, topo.num_su());
    debug_assert_eq!(pu_active.len(), topo.num_pu());

    // Phase 1: simultaneous choices from slot-start strategies.
    let mut snapshots = Vec::with_capacity(n);
    let mut powers = Vec::with_capacity(n);
    for agent in agents.iter_mut() {
        let s = agent.state_index();
        let action = agent.sample_action();
        snapshots.push(SlotSnapshot {
            action,
            prob: agent.strategy.prob(s, action),
        });
        powers.push(agent.power_levels[action]);
    }

    // Phase 2: physics of the joint outcome.
    let mut records = Vec::with_capacity(n);
    for (i, agent) in agents.iter().enumerate() {
        let gains = pu_gain_column(topo, i);
        let phi = pu_interference(pu_active, &gains, radio.pu_power_w);
        let gamma = sinr(i, &powers, topo, phi, radio.noise_w);
        let reward = realized_reward_raw(
            powers[i],
            gamma,
            agent.qos_sinr,
            radio.bandwidth_hz,
            radio.snr_gap,
        );
        let next = observe_state(i, gamma, agent.qos_sinr, snapshots[i].action);
        records.push(SlotRecord {
            agent: i,
            state: agent.state_index(),
            action: snapshots[i].action,
            reward,
            next_state: next.index(agent.num_actions),
            conjecture: 0.0,
            qos_ok: next.qos_ok,
            sinr: gamma,
            power_w: powers[i],
        });
    }

    // Phase 3: per-agent learning from slot-start snapshots.
    for (i, agent) in agents.iter_mut().enumerate() {
        let rec = &mut records[i];
        let (s, a, next) = (rec.state, rec.action, rec.next_state);
        let pi_start = snapshots[i].prob;
        agent.history.record(s, a, t, rec.reward);

        let conjecture_used = match rule {
            UpdateRule::ExactProduct | UpdateRule::FullInformation => {
                others_probs(&snapshots, i).iter().product()
            }
            UpdateRule::Conjecture => match agent.mode {
                ConjectureMode::Linear => agent.conjecture.value(s, a),
                ConjectureMode::History => {
                    agent
                        .history
                        .conjecture_estimate(s, a, pi_start, agent.conjecture.value(s, a))
                }
                ConjectureMode::Hybrid => {
                    if t > 0 && t % agent.history_window as u64 == 0 {
                        if let Some(gap) = agent.history.mean_gap(s, a) {
                            let anchored = estimate_conjecture_from_history(
                                Some(gap),
                                pi_start,
                                agent.conjecture.value(s, a),
                            );
                            agent.conjecture.set_value(s, a, anchored);
                        }
                    }
                    agent.conjecture.value(s, a)
                }
            },
        };
        rec.conjecture = conjecture_used;

        let alpha = agent.effective_alpha(t);
        match rule {
            UpdateRule::FullInformation => {
                let probs = others_probs(&snapshots, i);
                q_update_full_info(
                    &mut agent.q,
                    s,
                    a,
                    rec.reward,
                    &probs,
                    next,
                    alpha,
                    agent.learn.beta,
                );
            }
            _ => {
                q_update_conjecture(
                    &mut agent.q,
                    s,
                    a,
                    rec.reward,
                    conjecture_used,
                    next,
                    alpha,
                    agent.learn.beta,
                );
            }
        }

        agent.refresh_strategy_row(s);

        match rule {
            UpdateRule::Conjecture => match agent.mode {
                ConjectureMode::Linear | ConjectureMode::Hybrid => {
                    let pi_new = agent.strategy.prob(s, a);
                    agent.conjecture.revise(s, a, pi_start, pi_new);
                }
                ConjectureMode::History => {
                    agent.conjecture.set_value(s, a, conjecture_used);
                }
            },
            // Oracle wirings track the exact product for inspection.
            _ => agent.conjecture.set_value(s, a, conjecture_used),
        }

        agent.set_state(AgentState::from_index(i, next, agent.num_actions));
    }

    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn boltzmann_uniform_on_equal_values() {
        let pi = boltzmann_strategy(&[2.5, 2.5, 2.5], 1.0).unwrap();
        for p in &pi {
            assert_relative_eq!(*p, 1.0 / 3.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn boltzmann_shift_invariant() {
        let q = [1.0, -2.0, 0.5];
        let a = boltzmann_strategy(&q, 0.7).unwrap();
        let shifted: Vec<f64> = q.iter().map(|x| x + 123.0).collect();
        let b = boltzmann_strategy(&shifted, 0.7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn boltzmann_closed_form_quarter_three_quarters() {
        let tau = 2.0;
        let pi = boltzmann_strategy(&[0.0, tau * 3.0f64.ln()], tau).unwrap();
        assert_relative_eq!(pi[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(pi[1], 0.75, max_relative = 1e-12);
    }

    #[test]
    fn boltzmann_rejects_bad_temperature() {
        assert!(boltzmann_strategy(&[0.0], 0.0).is_err());
        assert!(boltzmann_strategy(&[0.0], -1.0).is_err());
    }

    #[test]
    fn learning_rate_schedule() {
        assert_eq!(learning_rate(0, 0.8, 2.0), 0.8);
        assert_relative_eq!(learning_rate(3, 0.8, 2.0), 0.1, max_relative = 1e-15);
        let mut prev = f64::INFINITY;
        for t in 0..50 {
            let a = learning_rate(t, 0.5, 1.1);
            assert!(a < prev);
            prev = a;
        }
        // Graceful underflow.
        assert_eq!(learning_rate(100_000, 0.5, 2.0), 0.0);
    }

    #[test]
    fn conjecture_estimate_examples() {
        assert_relative_eq!(
            estimate_conjecture_from_history(Some(0.0), 1.0, 0.5),
            1.0
        );
        assert_relative_eq!(
            estimate_conjecture_from_history(Some(1.0), 0.5, 0.5),
            1.0
        );
        assert_relative_eq!(
            estimate_conjecture_from_history(Some(3.0), 0.5, 0.5),
            0.5
        );
        assert_eq!(estimate_conjecture_from_history(None, 0.5, 0.125), 0.125);
    }

    #[test]
    fn reward_history_gap_tracking() {
        let mut h = RewardHistory::new(4, 2, 50);
        // Same value every slot: gaps of zero.
        for t in 0..3 {
            h.record(0, 0, t, 5.0);
        }
        assert_eq!(h.mean_gap(0, 0), Some(0.0));
        // Recur every 4 slots: gaps of three.
        for t in [0u64, 4, 8] {
            h.record(1, 1, t, 7.0);
        }
        assert_eq!(h.mean_gap(1, 1), Some(3.0));
        // Distinct values never recur.
        h.record(2, 0, 0, 1.0);
        h.record(2, 0, 1, 2.0);
        assert_eq!(h.mean_gap(2, 0), None);
        // Near-identical floats within tolerance count as recurrences.
        h.record(3, 0, 0, 1.0);
        h.record(3, 0, 2, 1.0 + 1e-12);
        assert_eq!(h.mean_gap(3, 0), Some(1.0));
    }

    #[test]
    fn update_conjecture_examples() {
        assert_eq!(update_conjecture(0.37, 0.5, 0.5, 1.0), 0.37);
        assert_relative_eq!(update_conjecture(0.5, 0.6, 0.5, 1.0), 0.4);
        assert_relative_eq!(update_conjecture(0.5, 0.4, 0.5, 1.0), 0.6);
        // Clamped at both ends.
        assert_eq!(update_conjecture(0.1, 0.9, 0.1, 1.0), 0.0);
        assert_eq!(update_conjecture(0.9, 0.1, 0.9, 1.0), 1.0);
    }

    #[test]
    fn conjecture_revision_counts_clamps() {
        let mut c = Conjecture::new(2, 2, 0.5, 1.0);
        c.revise(0, 0, 0.5, 0.6);
        assert_relative_eq!(c.value(0, 0), 0.4);
        assert_eq!(c.clamp_events(), 0);
        c.revise(0, 0, 0.1, 0.9);
        assert_eq!(c.value(0, 0), 0.0);
        assert_eq!(c.clamp_events(), 1);
    }

    #[test]
    fn q_update_conjecture_examples() {
        let mut q = QTable::zeros(2, 2);
        q.set(0, 0, 3.0);
        let before = q.clone();
        q_update_conjecture(&mut q, 0, 0, 10.0, 0.5, 1, 0.0, 0.9);
        assert_eq!(q, before);

        let mut q = QTable::zeros(2, 2);
        q_update_conjecture(&mut q, 0, 1, 4.0, 1.0, 1, 1.0, 0.0);
        assert_eq!(q.get(0, 1), 4.0);

        let mut q = QTable::zeros(2, 2);
        q.set(0, 0, 10.0);
        q.set(1, 0, 10.0);
        q_update_conjecture(&mut q, 0, 0, 4.0, 0.5, 1, 0.5, 0.9);
        assert_relative_eq!(q.get(0, 0), 10.5, max_relative = 1e-15);
        // Only the updated entry changed.
        assert_eq!(q.get(0, 1), 0.0);
        assert_eq!(q.get(1, 0), 10.0);
    }

    #[test]
    fn q_update_full_info_equals_conjecture_with_product() {
        let mut a = QTable::zeros(4, 3);
        let mut b = QTable::zeros(4, 3);
        for (k, v) in [(0usize, 1.5), (4, -2.0), (7, 3.25)] {
            a.as_mut_slice()[k] = v;
            b.as_mut_slice()[k] = v;
        }
        let probs = [0.3, 0.7, 0.9];
        let product: f64 = probs.iter().product();
        q_update_full_info(&mut a, 1, 1, 5.0, &probs, 2, 0.4, 0.9);
        q_update_conjecture(&mut b, 1, 1, 5.0, product, 2, 0.4, 0.9);
        assert_eq!(a, b);

        // Degenerate cases: one opponent playing w.p. 1, and no opponents.
        let mut a = QTable::zeros(2, 2);
        let mut b = QTable::zeros(2, 2);
        q_update_full_info(&mut a, 0, 0, 5.0, &[1.0], 1, 0.5, 0.9);
        q_update_conjecture(&mut b, 0, 0, 5.0, 1.0, 1, 0.5, 0.9);
        assert_eq!(a, b);
        let mut c = QTable::zeros(2, 2);
        let mut d = QTable::zeros(2, 2);
        q_update_full_info(&mut c, 0, 0, 5.0, &[], 1, 0.5, 0.9);
        q_update_single_agent(&mut d, 0, 0, 5.0, 1, 0.5, 0.9);
        assert_eq!(c, d);
    }

    #[test]
    fn q_update_single_agent_converges_to_geometric_fixed_point() {
        // One state, one action, reward 1, discount 0.9: fixed point 10.
        let mut q = QTable::zeros(1, 1);
        for _ in 0..2000 {
            q_update_single_agent(&mut q, 0, 0, 1.0, 0, 0.1, 0.9);
        }
        assert_relative_eq!(q.get(0, 0), 10.0, max_relative = 1e-6);
    }

    #[test]
    fn sample_from_row_degenerate_and_statistics() {
        assert_eq!(sample_from_row(&[1.0, 0.0], 0.999), 0);
        assert_eq!(sample_from_row(&[0.0, 1.0], 0.5), 1);

        let row = [0.2, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_from_row(&row, rng.random::<f64>())] += 1;
        }
        for (c, p) in counts.iter().zip(&row) {
            let mean = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (*c as f64 - mean).abs() < 3.0 * sd,
                "count {c} too far from {mean}"
            );
        }
    }

    #[test]
    fn sample_sequence_is_deterministic_per_seed() {
        let row = [0.25, 0.25, 0.5];
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_from_row(&row, rng.random::<f64>()))
                .collect()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }
}

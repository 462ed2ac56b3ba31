//! Exact enumeration tools the stochastic learner is validated against:
//! joint-power optima, exact expected rewards under mixed strategies,
//! pure-Nash-equilibrium checks, and an empirical contraction probe of the
//! per-entry backup operator.
//!
//! Everything here is pure given its inputs. Enumerations are guarded by an
//! explicit size limit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learning::{softmax_into, update_conjecture, QTable};
use crate::radio::{
    power_level, pu_gain_column, pu_interference, realized_reward_raw, sinr, AgentState,
    RadioParams, Topology,
};

/// Hard cap on `joint actions x PU patterns` for any exhaustive enumeration.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// One action index per SU; agent 0 is the most significant digit in the
/// dense joint index.
pub type JointAction = Vec<usize>;

/// Action-set sizes per agent (`m_i + 1` each).
pub fn action_counts(radio: &RadioParams) -> Vec<usize> {
    radio.su.iter().map(|s| s.levels).collect()
}

fn joint_total(sizes: &[usize]) -> u128 {
    sizes.iter().map(|s| *s as u128).product()
}

fn power_tables(radio: &RadioParams) -> Result<Vec<Vec<f64>>> {
    (0..radio.num_su())
        .map(|i| {
            let m = radio.su[i].levels - 1;
            (0..=m)
                .map(|a| power_level(a, m, radio.su[i].p_min_w, radio.p_max_eff(i)))
                .collect()
        })
        .collect()
}

/// All PU on/off patterns with strictly positive probability under
/// independent Bernoulli(activity) draws, with their weights.
pub fn pu_patterns(num_pu: usize, activity: f64) -> Vec<(Vec<bool>, f64)> {
    if num_pu == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    if activity == 0.0 {
        return vec![(vec![false; num_pu], 1.0)];
    }
    if activity == 1.0 {
        return vec![(vec![true; num_pu], 1.0)];
    }
    let mut out = Vec::with_capacity(1 << num_pu);
    for mask in 0u64..(1 << num_pu) {
        let pattern: Vec<bool> = (0..num_pu).map(|m| mask >> m & 1 == 1).collect();
        let weight = pattern
            .iter()
            .map(|on| if *on { activity } else { 1.0 - activity })
            .product();
        out.push((pattern, weight));
    }
    out
}

/// Per-agent (SINR, realized reward) for one joint action under one PU
/// pattern.
pub fn joint_outcome(
    topo: &Topology,
    radio: &RadioParams,
    actions: &[usize],
    pu_active: &[bool],
) -> Vec<(f64, f64)> {
    let powers: Vec<f64> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let m = radio.su[i].levels - 1;
            power_level(*a, m, radio.su[i].p_min_w, radio.p_max_eff(i)).expect("valid action")
        })
        .collect();
    (0..topo.num_su())
        .map(|i| {
            let gains = pu_gain_column(topo, i);
            let phi = pu_interference(pu_active, &gains, radio.pu_power_w);
            let gamma = sinr(i, &powers, topo, phi, radio.noise_w);
            let r = realized_reward_raw(
                powers[i],
                gamma,
                radio.su[i].qos_sinr,
                radio.bandwidth_hz,
                radio.snr_gap,
            );
            (gamma, r)
        })
        .collect()
}

/// How PU activity enters an oracle computation: a fixed on/off pattern, or
/// the exact Bernoulli(activity) average over all patterns.
#[derive(Debug, Clone)]
pub enum PuModel<'a> {
    Pattern(&'a [bool]),
    KappaAveraged,
}

/// Per-agent realized rewards of one joint action under the PU model.
pub fn joint_rewards(
    topo: &Topology,
    radio: &RadioParams,
    actions: &[usize],
    pu: &PuModel,
) -> Result<Vec<f64>> {
    match pu {
        PuModel::Pattern(p) => Ok(joint_outcome(topo, radio, actions, p)
            .into_iter()
            .map(|(_, r)| r)
            .collect()),
        PuModel::KappaAveraged => {
            let mut out = vec![0.0; topo.num_su()];
            for (pattern, weight) in pu_patterns(topo.num_pu(), radio.pu_activity) {
                for (i, (_, r)) in joint_outcome(topo, radio, actions, &pattern)
                    .into_iter()
                    .enumerate()
                {
                    out[i] += weight * r;
                }
            }
            Ok(out)
        }
    }
}

fn advance(actions: &mut [usize], sizes: &[usize]) -> bool {
    for d in (0..actions.len()).rev() {
        actions[d] += 1;
        if actions[d] < sizes[d] {
            return true;
        }
        actions[d] = 0;
    }
    false
}

/// Per-agent maximum of a brute-force scan over every joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumEntry {
    pub value: f64,
    pub joint: JointAction,
}

/// Enumerates every joint discrete power vector and returns each agent's
/// best achievable realized reward with an achieving joint action.
pub fn exhaustive_optimum(
    topo: &Topology,
    radio: &RadioParams,
    pu: &PuModel,
) -> Result<Vec<OptimumEntry>> {
    let sizes = action_counts(radio);
    let total = joint_total(&sizes);
    let patterns = match pu {
        PuModel::Pattern(_) => 1,
        PuModel::KappaAveraged => pu_patterns(topo.num_pu(), radio.pu_activity).len(),
    } as u128;
    if total * patterns > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "joint action",
            size: total * patterns,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = sizes.len();
    let mut best: Vec<OptimumEntry> = (0..n)
        .map(|_| OptimumEntry {
            value: f64::NEG_INFINITY,
            joint: vec![0; n],
        })
        .collect();
    let mut actions = vec![0usize; n];
    loop {
        let rewards = joint_rewards(topo, radio, &actions, pu)?;
        for (i, r) in rewards.iter().enumerate() {
            if *r > best[i].value {
                best[i].value = *r;
                best[i].joint = actions.clone();
            }
        }
        if !advance(&mut actions, &sizes) {
            break;
        }
    }
    Ok(best)
}

/// Activity-weighted average of the per-pattern optima: the exhaustive
/// optimum is computed separately under every PU pattern, then averaged
/// with the Bernoulli(activity) weights.
pub fn kappa_averaged_optimum(topo: &Topology, radio: &RadioParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; topo.num_su()];
    for (pattern, weight) in pu_patterns(topo.num_pu(), radio.pu_activity) {
        let opt = exhaustive_optimum(topo, radio, &PuModel::Pattern(&pattern))?;
        for (acc, entry) in out.iter_mut().zip(&opt) {
            *acc += weight * entry.value;
        }
    }
    Ok(out)
}

/// Exact per-agent expected realized reward under mixed strategies: the full
/// sum over joint actions and PU patterns of `reward x prod pi_j x weight`.
///
/// `strategies[i]` is agent i's probability row over its own actions.
pub fn exact_expected_reward(
    topo: &Topology,
    radio: &RadioParams,
    strategies: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let sizes = action_counts(radio);
    if strategies.len() != sizes.len() {
        return Err(Error::Shape(format!(
            "expected {} strategy rows, got {}",
            sizes.len(),
            strategies.len()
        )));
    }
    for (i, row) in strategies.iter().enumerate() {
        if row.len() != sizes[i] {
            return Err(Error::Shape(format!(
                "strategy row {i} has length {}, expected {}",
                row.len(),
                sizes[i]
            )));
        }
    }
    let patterns = pu_patterns(topo.num_pu(), radio.pu_activity);
    let total = joint_total(&sizes) * patterns.len() as u128;
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "joint action x PU pattern",
            size: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = sizes.len();
    let mut out = vec![0.0; n];
    let mut actions = vec![0usize; n];
    loop {
        let joint_prob: f64 = actions
            .iter()
            .enumerate()
            .map(|(j, a)| strategies[j][*a])
            .product();
        if joint_prob > 0.0 {
            for (pattern, weight) in &patterns {
                for (i, (_, r)) in joint_outcome(topo, radio, &actions, pattern)
                    .into_iter()
                    .enumerate()
                {
                    out[i] += joint_prob * weight * r;
                }
            }
        }
        if !advance(&mut actions, &sizes) {
            break;
        }
    }
    Ok(out)
}

/// A strictly improving unilateral deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub action: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeCheck {
    pub is_ne: bool,
    /// Best strictly improving deviation per agent, if any.
    pub best_deviations: Vec<Option<Deviation>>,
}

/// Pure-strategy Nash check: no agent may strictly increase its realized
/// reward by unilaterally changing its own action.
pub fn check_pure_ne(
    topo: &Topology,
    radio: &RadioParams,
    actions: &[usize],
    pu: &PuModel,
) -> Result<NeCheck> {
    let sizes = action_counts(radio);
    let base = joint_rewards(topo, radio, actions, pu)?;
    let mut best_deviations = Vec::with_capacity(sizes.len());
    for i in 0..sizes.len() {
        let mut best: Option<Deviation> = None;
        let mut trial = actions.to_vec();
        for a in 0..sizes[i] {
            if a == actions[i] {
                continue;
            }
            trial[i] = a;
            let r = joint_rewards(topo, radio, &trial, pu)?[i];
            let gain = r - base[i];
            if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Deviation { action: a, gain });
            }
        }
        trial[i] = actions[i];
        best_deviations.push(best);
    }
    Ok(NeCheck {
        is_ne: best_deviations.iter().all(|d| d.is_none()),
        best_deviations,
    })
}

/// The tuple of all agents' Q-tables.
#[derive(Debug, Clone, PartialEq)]
pub struct QProfile(pub Vec<QTable>);

impl QProfile {
    pub fn zeros(sizes: &[usize]) -> Self {
        QProfile(
            sizes
                .iter()
                .map(|n| QTable::zeros(AgentState::count(*n), *n))
                .collect(),
        )
    }
}

/// Sup-norm distance over every (agent, state, action) entry.
pub fn q_distance(a: &QProfile, b: &QProfile) -> Result<f64> {
    if a.0.len() != b.0.len() {
        return Err(Error::Shape(format!(
            "profiles have {} vs {} agents",
            a.0.len(),
            b.0.len()
        )));
    }
    let mut d = 0.0f64;
    for (i, (qa, qb)) in a.0.iter().zip(&b.0).enumerate() {
        match qa.sup_distance(qb) {
            Some(di) => d = d.max(di),
            None => {
                return Err(Error::Shape(format!(
                    "agent {i} tables have mismatched shapes"
                )))
            }
        }
    }
    Ok(d)
}

/// One realized environment outcome per (agent, state, action) entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryOutcome {
    pub reward: f64,
    pub next_state: usize,
}

/// The environment realization an operator application is evaluated under:
/// for every entry, the reward collected and the successor state.
#[derive(Debug, Clone)]
pub struct Realization {
    /// `outcomes[agent][state * num_actions + action]`.
    pub outcomes: Vec<Vec<EntryOutcome>>,
}

/// Draws a realization: for each (agent, state, action), the other agents'
/// actions are drawn uniformly and the PU pattern from Bernoulli(activity);
/// the entry's own action is fixed by its index.
pub fn draw_realization(
    topo: &Topology,
    radio: &RadioParams,
    rng: &mut ChaCha8Rng,
) -> Realization {
    let sizes = action_counts(radio);
    let n = sizes.len();
    let mut outcomes = Vec::with_capacity(n);
    for i in 0..n {
        let mut per_entry = Vec::with_capacity(AgentState::count(sizes[i]) * sizes[i]);
        for _state in 0..AgentState::count(sizes[i]) {
            for a in 0..sizes[i] {
                let mut joint: Vec<usize> = (0..n)
                    .map(|j| rng.random_range(0..sizes[j]))
                    .collect();
                joint[i] = a;
                let pattern: Vec<bool> = (0..topo.num_pu())
                    .map(|_| rng.random::<f64>() < radio.pu_activity)
                    .collect();
                let (gamma, reward) = joint_outcome(topo, radio, &joint, &pattern)[i];
                let next = AgentState {
                    agent: i,
                    qos_ok: gamma >= radio.su[i].qos_sinr,
                    action: a,
                }
                .index(sizes[i]);
                per_entry.push(EntryOutcome {
                    reward,
                    next_state: next,
                });
            }
        }
        outcomes.push(per_entry);
    }
    Realization { outcomes }
}

/// Applies the per-entry backup operator to a whole profile under fixed
/// conjectures and a fixed realization:
/// `H Q_i(s, a) = conjecture_i(s, a) * reward + beta * max_b Q_i(s', b)`.
pub fn apply_h(
    profile: &QProfile,
    realization: &Realization,
    conjectures: &[QTable],
    beta: f64,
) -> Result<QProfile> {
    if profile.0.len() != realization.outcomes.len() || profile.0.len() != conjectures.len() {
        return Err(Error::Shape(
            "profile, realization, and conjectures must cover the same agents".into(),
        ));
    }
    let mut out = Vec::with_capacity(profile.0.len());
    for (i, q) in profile.0.iter().enumerate() {
        let (ns, na) = (q.num_states(), q.num_actions());
        if conjectures[i].num_states() != ns
            || conjectures[i].num_actions() != na
            || realization.outcomes[i].len() != ns * na
        {
            return Err(Error::Shape(format!("agent {i} shape mismatch in apply_h")));
        }
        let mut hq = QTable::zeros(ns, na);
        for s in 0..ns {
            for a in 0..na {
                let o = realization.outcomes[i][s * na + a];
                let value = conjectures[i].get(s, a) * o.reward + beta * q.max_row(o.next_state);
                hq.set(s, a, value);
            }
        }
        out.push(hq);
    }
    Ok(QProfile(out))
}

/// Upper edge of the reachable Q box, `R_max / (1 - beta)`, where `R_max` is
/// the maximum realized reward over joint actions and positive-probability
/// PU patterns.
pub fn q_box_upper(topo: &Topology, radio: &RadioParams, beta: f64) -> Result<f64> {
    let mut r_max = 0.0f64;
    for (pattern, _) in pu_patterns(topo.num_pu(), radio.pu_activity) {
        for entry in exhaustive_optimum(topo, radio, &PuModel::Pattern(&pattern))? {
            r_max = r_max.max(entry.value);
        }
    }
    Ok(r_max / (1.0 - beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub max_ratio: f64,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    pub q_box_upper: f64,
}

/// Empirical contraction probe of the backup operator.
///
/// For each random pair (Q, Q') drawn from the reachable box, both Boltzmann
/// strategies are formed at temperature `tau`, both conjectures are derived
/// from common random reference points via the linear revision rule, a
/// common environment realization is drawn, and the operator is applied to
/// both sides. Reports the maximum of `d(HQ, HQ') / d(Q, Q')`.
pub fn contraction_probe(
    topo: &Topology,
    radio: &RadioParams,
    tau: f64,
    beta: f64,
    omega: f64,
    num_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ContractionReport> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let sizes = action_counts(radio);
    let box_upper = q_box_upper(topo, radio, beta)?;
    let mut max_ratio = 0.0f64;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    let random_profile = |rng: &mut ChaCha8Rng| -> QProfile {
        QProfile(
            sizes
                .iter()
                .map(|na| {
                    let mut q = QTable::zeros(AgentState::count(*na), *na);
                    for v in q.as_mut_slice() {
                        *v = rng.random::<f64>() * box_upper;
                    }
                    q
                })
                .collect(),
        )
    };

    let mut scratch = Vec::new();
    for _ in 0..num_pairs {
        let qa = random_profile(rng);
        let qb = random_profile(rng);

        // Common reference points, shared by both sides of the pair.
        let refs: Vec<(QTable, QTable)> = sizes
            .iter()
            .map(|na| {
                let ns = AgentState::count(*na);
                let mut c_ref = QTable::zeros(ns, *na);
                let mut pi_ref = QTable::zeros(ns, *na);
                for v in c_ref.as_mut_slice() {
                    *v = rng.random::<f64>();
                }
                for v in pi_ref.as_mut_slice() {
                    *v = rng.random::<f64>();
                }
                (c_ref, pi_ref)
            })
            .collect();

        let conjectures_for = |profile: &QProfile, scratch: &mut Vec<f64>| -> Vec<QTable> {
            profile
                .0
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let (ns, na) = (q.num_states(), q.num_actions());
                    let mut c = QTable::zeros(ns, na);
                    for s in 0..ns {
                        softmax_into(q.row(s), tau, scratch);
                        for a in 0..na {
                            let value = update_conjecture(
                                refs[i].0.get(s, a),
                                scratch[a],
                                refs[i].1.get(s, a),
                                omega,
                            );
                            c.set(s, a, value);
                        }
                    }
                    c
                })
                .collect()
        };

        let ca = conjectures_for(&qa, &mut scratch);
        let cb = conjectures_for(&qb, &mut scratch);
        let realization = draw_realization(topo, radio, rng);

        let d0 = q_distance(&qa, &qb)?;
        if d0 == 0.0 {
            skipped += 1;
            continue;
        }
        let ha = apply_h(&qa, &realization, &ca, beta)?;
        let hb = apply_h(&qb, &realization, &cb, beta)?;
        let ratio = q_distance(&ha, &hb)? / d0;
        max_ratio = max_ratio.max(ratio);
        evaluated += 1;
    }

    Ok(ContractionReport {
        max_ratio,
        pairs_evaluated: evaluated,
        pairs_skipped: skipped,
        q_box_upper: box_upper,
    })
}

#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub profile: QProfile,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta: f64,
}

/// Iterates `Q <- E[H Q]` with the expectation taken exactly: other agents'
/// actions are drawn from their Boltzmann strategies evaluated at the fixed
/// `reference_states`, PU patterns from Bernoulli(activity), and the
/// conjecture inside the backup is the realized product of the other agents'
/// probabilities.
pub fn fixed_point_iteration(
    topo: &Topology,
    radio: &RadioParams,
    tau: f64,
    beta: f64,
    reference_states: &[usize],
    init: &QProfile,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointOutcome> {
    let sizes = action_counts(radio);
    let n = sizes.len();
    if reference_states.len() != n || init.0.len() != n {
        return Err(Error::Shape(
            "reference states and profile must cover every agent".into(),
        ));
    }
    let patterns = pu_patterns(topo.num_pu(), radio.pu_activity);
    let others_total: u128 = joint_total(&sizes) * patterns.len() as u128;
    if others_total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "fixed-point expectation",
            size: others_total,
            limit: ENUMERATION_LIMIT,
        });
    }

    // Cache per (joint, pattern): (sinr_i, reward_i) for every agent.
    let mut outcome_cache: Vec<Vec<Vec<(f64, f64)>>> = Vec::new();
    let mut joints: Vec<JointAction> = Vec::new();
    let mut actions = vec![0usize; n];
    loop {
        let per_pattern: Vec<Vec<(f64, f64)>> = patterns
            .iter()
            .map(|(p, _)| joint_outcome(topo, radio, &actions, p))
            .collect();
        outcome_cache.push(per_pattern);
        joints.push(actions.clone());
        if !advance(&mut actions, &sizes) {
            break;
        }
    }

    let mut q = init.clone();
    let mut scratch = Vec::new();
    for iter in 1..=max_iter {
        // Strategy rows at the reference states.
        let ref_rows: Vec<Vec<f64>> = q
            .0
            .iter()
            .enumerate()
            .map(|(j, t)| {
                softmax_into(t.row(reference_states[j]), tau, &mut scratch);
                scratch.clone()
            })
            .collect();

        let mut next = QProfile(
            sizes
                .iter()
                .map(|na| QTable::zeros(AgentState::count(*na), *na))
                .collect(),
        );
        for i in 0..n {
            let na = sizes[i];
            for s in 0..AgentState::count(na) {
                for a in 0..na {
                    let mut acc = 0.0;
                    for (jidx, joint) in joints.iter().enumerate() {
                        if joint[i] != a {
                            continue;
                        }
                        let others_prob: f64 = joint
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(j, aj)| ref_rows[j][*aj])
                            .product();
                        if others_prob == 0.0 {
                            continue;
                        }
                        for (pidx, (_, weight)) in patterns.iter().enumerate() {
                            let (gamma, reward) = outcome_cache[jidx][pidx][i];
                            let next_state = AgentState {
                                agent: i,
                                qos_ok: gamma >= radio.su[i].qos_sinr,
                                action: a,
                            }
                            .index(na);
                            acc += others_prob
                                * weight
                                * (others_prob * reward + beta * q.0[i].max_row(next_state));
                        }
                    }
                    next.0[i].set(s, a, acc);
                }
            }
        }
        let delta = q_distance(&q, &next)?;
        q = next;
        if delta <= tol {
            return Ok(FixedPointOutcome {
                profile: q,
                iterations: iter,
                converged: true,
                final_delta: delta,
            });
        }
        if iter == max_iter {
            return Ok(FixedPointOutcome {
                profile: q,
                iterations: iter,
                converged: false,
                final_delta: delta,
            });
        }
    }
    unreachable!("loop returns on the last iteration");
}

/// Precomputed realized rewards over the whole joint space, used by the
/// harness to evaluate exact expected rewards every slot at simulation
/// speed. The activity-averaged reward of every joint action is cached, as
/// are the per-pattern optima.
#[derive(Debug, Clone)]
pub struct JointRewardTable {
    sizes: Vec<usize>,
    num_joints: usize,
    num_agents: usize,
    /// `kappa_avg[joint * num_agents + i]`: activity-averaged realized reward.
    kappa_avg: Vec<f64>,
    /// Per-pattern, per-agent maxima over the joint space.
    per_pattern_max: Vec<Vec<f64>>,
    pattern_weights: Vec<f64>,
    r_max: f64,
}

impl JointRewardTable {
    pub fn build(topo: &Topology, radio: &RadioParams) -> Result<Self> {
        let sizes = action_counts(radio);
        let n = sizes.len();
        let patterns = pu_patterns(topo.num_pu(), radio.pu_activity);
        let total = joint_total(&sizes);
        if total * patterns.len() as u128 > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                what: "joint reward table",
                size: total * patterns.len() as u128,
                limit: ENUMERATION_LIMIT,
            });
        }
        let num_joints = total as usize;
        let powers = power_tables(radio)?;

        // Received power at rx i from tx j at action a: rp[j][a][i].
        let rp: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|j| {
                powers[j]
                    .iter()
                    .map(|p| (0..n).map(|i| topo.gains_su.get(j, i) * p).collect())
                    .collect()
            })
            .collect();
        // PU interference per pattern and receiver.
        let phi: Vec<Vec<f64>> = patterns
            .iter()
            .map(|(pattern, _)| {
                (0..n)
                    .map(|i| {
                        pu_interference(pattern, &pu_gain_column(topo, i), radio.pu_power_w)
                    })
                    .collect()
            })
            .collect();

        let mut kappa_avg = vec![0.0; num_joints * n];
        let mut per_pattern_max = vec![vec![f64::NEG_INFINITY; n]; patterns.len()];
        let mut r_max = 0.0f64;

        // Odometer over joints with incrementally maintained total received
        // power per receiver (own signal included; subtracted at use).
        let mut actions = vec![0usize; n];
        let mut received: Vec<f64> = (0..n).map(|i| (0..n).map(|j| rp[j][0][i]).sum()).collect();
        let mut joint = 0usize;
        loop {
            let base = joint * n;
            for i in 0..n {
                let own = rp[i][actions[i]][i];
                let su_interference = received[i] - own;
                let power = powers[i][actions[i]];
                let mut avg = 0.0;
                for (p, (_, weight)) in patterns.iter().enumerate() {
                    let gamma = own / (radio.noise_w + phi[p][i] + su_interference);
                    let r = realized_reward_raw(
                        power,
                        gamma,
                        radio.su[i].qos_sinr,
                        radio.bandwidth_hz,
                        radio.snr_gap,
                    );
                    avg += weight * r;
                    if r > per_pattern_max[p][i] {
                        per_pattern_max[p][i] = r;
                    }
                    if r > r_max {
                        r_max = r;
                    }
                }
                kappa_avg[base + i] = avg;
            }

            // Advance the odometer, updating the received-power sums.
            let mut advanced = false;
            for d in (0..n).rev() {
                let old = actions[d];
                let new = if old + 1 < sizes[d] { old + 1 } else { 0 };
                actions[d] = new;
                for i in 0..n {
                    received[i] += rp[d][new][i] - rp[d][old][i];
                }
                if new != 0 {
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
            joint += 1;
        }

        Ok(JointRewardTable {
            sizes,
            num_joints,
            num_agents: n,
            kappa_avg,
            per_pattern_max,
            pattern_weights: patterns.into_iter().map(|(_, w)| w).collect(),
            r_max,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Maximum realized reward over joints, patterns, and agents.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Activity-averaged realized rewards of one joint action.
    pub fn kappa_avg_rewards(&self, joint: usize) -> &[f64] {
        &self.kappa_avg[joint * self.num_agents..(joint + 1) * self.num_agents]
    }

    /// Dense joint index of an action vector (agent 0 most significant).
    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (a, s)| acc * s + a)
    }

    /// Action vector of a dense joint index.
    pub fn joint_actions(&self, mut joint: usize) -> JointAction {
        let mut out = vec![0usize; self.sizes.len()];
        for d in (0..self.sizes.len()).rev() {
            out[d] = joint % self.sizes[d];
            joint /= self.sizes[d];
        }
        out
    }

    /// Activity-weighted average of the per-pattern optima.
    pub fn kappa_averaged_optimum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_agents];
        for (maxima, weight) in self.per_pattern_max.iter().zip(&self.pattern_weights) {
            for (acc, m) in out.iter_mut().zip(maxima) {
                *acc += weight * m;
            }
        }
        out
    }

    /// Exact per-agent expected realized reward under the given strategy
    /// rows (one probability row per agent over its own actions).
    ///
    /// Runs every slot of every episode, so it walks the joint space
    /// iteratively with running prefix products instead of recursing.
    pub fn expected_rewards(&self, rows: &[&[f64]]) -> Vec<f64> {
        debug_assert_eq!(rows.len(), self.num_agents);
        let n = self.num_agents;
        let mut out = vec![0.0; n];
        let last = n - 1;
        let last_row = rows[last];
        // digits[d] and prefix[d] = product of row probabilities of digits < d.
        let mut digits = vec![0usize; n];
        let mut prefix = vec![1.0f64; n];
        for k in 0..last {
            prefix[k + 1] = prefix[k] * rows[k][0];
        }
        let mut joint = 0usize;
        'joints: loop {
            let p_prefix = prefix[last];
            let base0 = joint * n;
            for (a_last, p_last) in last_row.iter().enumerate() {
                let p = p_prefix * p_last;
                let base = base0 + a_last * n;
                for (i, acc) in out.iter_mut().enumerate() {
                    *acc += p * self.kappa_avg[base + i];
                }
            }
            joint += self.sizes[last];
            // Advance the leading digits; the last digit was unrolled above.
            let mut d = last;
            loop {
                if d == 0 {
                    break 'joints;
                }
                d -= 1;
                digits[d] += 1;
                if digits[d] < self.sizes[d] {
                    for k in d..last {
                        prefix[k + 1] = prefix[k] * rows[k][digits[k]];
                    }
                    continue 'joints;
                }
                digits[d] = 0;
            }
        }
        out
    }
}

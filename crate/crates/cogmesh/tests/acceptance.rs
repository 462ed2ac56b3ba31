//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). Tolerances and runtime
//! budgets are pinned in the constants below.
//!
//! The shipped configuration files under `configs/` are the single source of
//! the experiment definitions, so these tests also exercise the config layer.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cogmesh::config::parse_config;
use cogmesh::harness::{
    convergence_slot, optimality_gap, run_experiment, sweep, Scenario, SweepParam,
};
use cogmesh::learning::{
    algorithm_slot, boltzmann_strategy, q_update_conjecture, update_conjecture, Agent,
    ConjectureInit, QTable, UpdateRule,
};
use cogmesh::oracle::{
    contraction_probe, exact_expected_reward, fixed_point_iteration, joint_outcome, q_box_upper,
    q_distance, QProfile,
};
use cogmesh::radio::{
    generate_topology, observe_state, power_level, pu_gain_column, pu_interference, reward, sinr,
    AgentState, GainMatrix, Pos, RadioParams, SuParams, Topology,
};

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load_scenario(name: &str) -> (cogmesh::config::RunConfig, Scenario) {
    let text = std::fs::read_to_string(config_path(name)).expect("shipped config readable");
    let config = parse_config(&text).expect("shipped config valid");
    let scenario = config.to_scenario().expect("scenario conversion");
    (config, scenario)
}

fn assert_budget(name: &str, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "{name}: runtime {elapsed:?} exceeds budget {budget:?}"
    );
}

/// Builds the agent population of a scenario with the harness seed
/// conventions (one RNG stream per agent).
fn build_agents(scenario: &Scenario, episode_seed: u64) -> Vec<Agent> {
    let counts: Vec<usize> = scenario.radio.su.iter().map(|s| s.levels).collect();
    (0..scenario.num_su)
        .map(|i| {
            let su = &scenario.radio.su[i];
            let m = su.levels - 1;
            let levels: Vec<f64> = (0..=m)
                .map(|a| power_level(a, m, su.p_min_w, scenario.radio.p_max_eff(i)).unwrap())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
            rng.set_stream(2 + i as u64);
            Agent::new(
                i,
                &counts,
                scenario.learn,
                scenario.conjecture_mode,
                scenario.conjecture_init,
                scenario.conjecture_omega,
                scenario.history_window,
                levels,
                su.qos_sinr,
                rng,
            )
        })
        .collect()
}

fn sup_distance(a: &[Agent], b: &[Agent]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.q.sup_distance(&y.q).expect("same shapes"))
        .fold(0.0, f64::max)
}

// Criterion 1: wiring the conjecture to the exact product of the other
// agents' strategy probabilities reproduces the full-information update
// trajectory within 1e-12 sup-norm over 1000 slots.
#[test]
fn acceptance_01_oracle_equivalence_of_update_rules() {
    let start = Instant::now();
    let (_, scenario) = load_scenario("two_by_two.json");
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        13,
        &scenario.channel,
        &scenario.geometry,
    )
    .unwrap();

    let mut exact = build_agents(&scenario, 13);
    let mut full = build_agents(&scenario, 13);
    let pu_idle = vec![false; scenario.num_pu];
    let mut max_dist = 0.0f64;
    for t in 0..1000u64 {
        algorithm_slot(
            &mut exact,
            &topo,
            &scenario.radio,
            &pu_idle,
            t,
            UpdateRule::ExactProduct,
        );
        algorithm_slot(
            &mut full,
            &topo,
            &scenario.radio,
            &pu_idle,
            t,
            UpdateRule::FullInformation,
        );
        max_dist = max_dist.max(sup_distance(&exact, &full));
    }
    let elapsed = start.elapsed();
    assert!(
        max_dist <= 1e-12,
        "trajectories diverged: sup distance {max_dist}"
    );
    assert_budget("criterion 1", elapsed, Duration::from_secs(1));
    println!(
        "acceptance 01 (oracle equivalence): PASS — sup distance {max_dist:.3e} over 1000 slots, {elapsed:?}"
    );
}

// Criterion 2: the backup operator is an empirical contraction for large
// temperatures, with the ratio approaching the discount factor.
#[test]
fn acceptance_02_contraction_at_large_temperature() {
    let start = Instant::now();
    let (_, scenario) = load_scenario("two_by_two.json");
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        13,
        &scenario.channel,
        &scenario.geometry,
    )
    .unwrap();
    let beta = scenario.learn.beta;
    assert_eq!(beta, 0.9);
    let box_upper = q_box_upper(&topo, &scenario.radio, beta).unwrap();
    assert!(box_upper > 0.0);

    let grid = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3];
    let mut ratios = Vec::new();
    for factor in grid {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let report = contraction_probe(
            &topo,
            &scenario.radio,
            factor * box_upper,
            beta,
            scenario.conjecture_omega,
            200,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.pairs_evaluated + report.pairs_skipped, 200);
        ratios.push(report.max_ratio);
    }

    let threshold_idx = ratios
        .iter()
        .position(|r| *r < 1.0)
        .expect("some grid temperature contracts");
    assert!(
        ratios[threshold_idx..].iter().all(|r| *r < 1.0),
        "ratio must stay below one above the located threshold: {ratios:?}"
    );
    // The probe grid should also exhibit the non-contractive small-tau
    // regime; the threshold is informative only if it is interior.
    assert!(
        threshold_idx > 0,
        "expected a non-contractive temperature at the low end: {ratios:?}"
    );
    let at_hundred = ratios[5];
    assert!(
        (at_hundred - beta).abs() <= 0.05,
        "ratio at 100x box width is {at_hundred}, not within 0.05 of beta {beta}"
    );

    // Fixed-point iteration: two starts land on the same profile.
    let tau = 10.0 * box_upper;
    let sizes: Vec<usize> = scenario.radio.su.iter().map(|s| s.levels).collect();
    let refs = vec![0usize; sizes.len()];
    let from_zero = fixed_point_iteration(
        &topo,
        &scenario.radio,
        tau,
        beta,
        &refs,
        &QProfile::zeros(&sizes),
        1e-9,
        20_000,
    )
    .unwrap();
    let mut high = QProfile::zeros(&sizes);
    for table in &mut high.0 {
        table.as_mut_slice().fill(box_upper);
    }
    let from_high = fixed_point_iteration(
        &topo,
        &scenario.radio,
        tau,
        beta,
        &refs,
        &high,
        1e-9,
        20_000,
    )
    .unwrap();
    assert!(from_zero.converged && from_high.converged);
    // Polish both limits with a fixed number of extra applications so the
    // comparison sees the attractor rather than the stopping tolerance.
    let polish = |profile: &QProfile| {
        fixed_point_iteration(&topo, &scenario.radio, tau, beta, &refs, profile, 0.0, 300)
            .unwrap()
            .profile
    };
    let fp_dist = q_distance(&polish(&from_zero.profile), &polish(&from_high.profile)).unwrap();
    assert!(
        fp_dist <= 1e-8,
        "fixed points from different starts differ by {fp_dist}"
    );

    let elapsed = start.elapsed();
    assert_budget("criterion 2", elapsed, Duration::from_secs(10));
    println!(
        "acceptance 02 (contraction): PASS — ratios {:?}, threshold at grid index {threshold_idx}, \
         ratio(100x box)={at_hundred:.4}, fixed-point agreement {fp_dist:.2e}, {elapsed:?}",
        ratios.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
}

// Criterion 3: larger temperatures yield worse tail expected reward for the
// first SU, monotonically over the swept triple, with at least 5%
// separation between the extremes.
#[test]
fn acceptance_03_temperature_ordering() {
    let start = Instant::now();
    let (config, scenario) = load_scenario("fig3.json");
    assert_eq!(scenario.num_su, 3);
    assert_eq!(scenario.num_pu, 3);
    assert_eq!(scenario.radio.pu_activity, 0.5);
    assert_eq!(scenario.radio.su[0].levels, 2);
    assert_eq!(scenario.num_episodes, 200);

    let sweep_spec = config.sweep.as_ref().expect("fig3 config carries the sweep");
    let param = SweepParam::parse(&sweep_spec.param).unwrap();
    assert_eq!(param, SweepParam::Tau);
    let mut values = sweep_spec.values.clone();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(values.len(), 3);

    let points = sweep(&scenario, param, &values, config.base_seed, 1).unwrap();
    let tails: Vec<f64> = points
        .iter()
        .map(|p| p.series.tail_mean_expected(0, scenario.tail_fraction))
        .collect();
    let elapsed = start.elapsed();

    assert!(
        tails[0] >= tails[1] && tails[1] >= tails[2],
        "tail expected reward must be non-increasing in tau: {tails:?}"
    );
    assert!(
        tails[0] >= 1.05 * tails[2],
        "smallest-tau curve must sit at least 5% above the largest-tau curve: {tails:?}"
    );
    assert_budget("criterion 3", elapsed, Duration::from_secs(120));
    println!(
        "acceptance 03 (temperature ordering): PASS — tails {tails:?} for tau {values:?}, \
         separation {:.2}%, {elapsed:?}",
        (tails[0] / tails[2] - 1.0) * 100.0
    );
}

// Criterion 4: at small temperature, a smaller initial learning rate reaches
// 90% of its own tail mean later.
#[test]
fn acceptance_04_learning_rate_convergence_ordering() {
    let start = Instant::now();
    let (config, scenario) = load_scenario("fig4.json");
    let sweep_spec = config.sweep.as_ref().expect("fig4 config carries the sweep");
    let param = SweepParam::parse(&sweep_spec.param).unwrap();
    assert_eq!(param, SweepParam::Alpha0);
    let mut values = sweep_spec.values.clone();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(values.len(), 2);

    let points = sweep(&scenario, param, &values, config.base_seed, 1).unwrap();
    let slots: Vec<Option<usize>> = points
        .iter()
        .map(|p| convergence_slot(&p.series, 0, 0.9, scenario.tail_fraction))
        .collect();
    let elapsed = start.elapsed();

    let small = slots[0].expect("small alpha0 curve must cross 90% of its tail");
    let large = slots[1].expect("large alpha0 curve must cross 90% of its tail");
    assert!(
        small > large,
        "smaller alpha0 must converge later: slot({}) = {small} vs slot({}) = {large}",
        values[0],
        values[1]
    );
    assert_budget("criterion 4", elapsed, Duration::from_secs(120));
    println!(
        "acceptance 04 (learning-rate ordering): PASS — 90%-of-tail slots: alpha0={} -> {small}, \
         alpha0={} -> {large}, {elapsed:?}",
        values[0], values[1]
    );
}

// Criterion 5: mean optimality gap across agents stays within the widened
// tolerance on the six-SU scenario.
#[test]
fn acceptance_05_optimality_gap() {
    let start = Instant::now();
    let (config, scenario) = load_scenario("fig5.json");
    assert_eq!(scenario.num_su, 6);
    assert_eq!(scenario.num_pu, 5);
    assert_eq!(scenario.radio.pu_activity, 1.0);
    assert_eq!(scenario.radio.su[0].levels, 6);
    assert_eq!(scenario.num_episodes, 200);
    // Levels 100..200 mW in 20 mW steps.
    let su = &scenario.radio.su[0];
    let levels: Vec<f64> = (0..su.levels)
        .map(|a| power_level(a, su.levels - 1, su.p_min_w, scenario.radio.p_max_eff(0)).unwrap())
        .collect();
    for (i, l) in levels.iter().enumerate() {
        assert!((l - (0.1 + 0.02 * i as f64)).abs() < 1e-12);
    }

    let series = run_experiment(&scenario, config.base_seed, 1).unwrap();
    let gaps = optimality_gap(&series, scenario.tail_fraction);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let elapsed = start.elapsed();

    assert!(
        mean_gap <= 0.35,
        "mean optimality gap {mean_gap} exceeds 0.35 (per-agent: {gaps:?})"
    );
    assert_budget("criterion 5", elapsed, Duration::from_secs(600));
    println!(
        "acceptance 05 (optimality gap): PASS — mean gap {mean_gap:.4}, per-agent {:?}, {elapsed:?}",
        gaps.iter().map(|g| (g * 1e3).round() / 1e3).collect::<Vec<_>>()
    );
}

// Criterion 6: higher PU activity degrades every agent's tail expected
// reward, allowing one small adjacent-pair violation per agent.
#[test]
fn acceptance_06_pu_activity_monotonicity() {
    let start = Instant::now();
    let (config, scenario) = load_scenario("fig6.json");
    let sweep_spec = config.sweep.as_ref().expect("fig6 config carries the sweep");
    assert_eq!(SweepParam::parse(&sweep_spec.param).unwrap(), SweepParam::Kappa);
    assert_eq!(sweep_spec.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

    let points = sweep(
        &scenario,
        SweepParam::Kappa,
        &sweep_spec.values,
        config.base_seed,
        1,
    )
    .unwrap();
    let elapsed = start.elapsed();

    // A pair counts as a violation only above a 0.2% noise floor (relative
    // to the agent's scale); at most one such violation is allowed and it
    // must stay within 2%.
    let mut summary = Vec::new();
    for agent in 0..scenario.num_su {
        let tails: Vec<f64> = points
            .iter()
            .map(|p| p.series.tail_mean_expected(agent, scenario.tail_fraction))
            .collect();
        let scale = tails.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let violations: Vec<f64> = tails
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[1] - w[0]) / scale)
            .filter(|v| *v > 0.002)
            .collect();
        assert!(
            violations.len() <= 1,
            "agent {agent}: more than one adjacent-pair violation: tails {tails:?}"
        );
        assert!(
            violations.iter().all(|v| *v <= 0.02),
            "agent {agent}: violation exceeds 2%: tails {tails:?}"
        );
        summary.push((agent, violations.len()));
    }
    assert_budget("criterion 6", elapsed, Duration::from_secs(900));
    println!(
        "acceptance 06 (PU activity monotonicity): PASS — per-agent violations {summary:?}, {elapsed:?}"
    );
}

// Criterion 7: exact expected rewards match frozen-strategy Monte Carlo
// within three standard errors on randomized small instances.
#[test]
fn acceptance_07_exact_expected_reward_vs_monte_carlo() {
    let start = Instant::now();
    let (_, base) = load_scenario("two_by_two.json");
    let mc_slots = 100_000usize;
    let mut checked = 0usize;

    for instance in 0..10u64 {
        let num_su = 1 + (instance as usize % 3);
        let levels = 2 + (instance as usize % 2);
        let kappa = [0.0, 0.3, 0.7, 1.0][instance as usize % 4];
        let num_pu = 2;

        let radio = RadioParams {
            bandwidth_hz: 1e6,
            noise_w: 1e-10,
            snr_gap: 1.0,
            pu_power_w: 0.2,
            pu_activity: kappa,
            power_mask_w: 0.2,
            su: (0..num_su)
                .map(|_| SuParams {
                    p_min_w: 0.1,
                    p_max_w: 0.2,
                    qos_sinr: 0.01,
                    levels,
                })
                .collect(),
        };
        radio.validate().unwrap();
        let topo = generate_topology(
            num_su,
            num_pu,
            1000 + instance,
            &base.channel,
            &base.geometry,
        )
        .unwrap();

        // Random strictly positive strategies.
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + instance);
        let strategies: Vec<Vec<f64>> = (0..num_su)
            .map(|_| {
                let raw: Vec<f64> = (0..levels).map(|_| 0.05 + rng.random::<f64>()).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / sum).collect()
            })
            .collect();

        let exact = exact_expected_reward(&topo, &radio, &strategies).unwrap();

        // Monte Carlo over sampled joint actions and PU patterns.
        let mut sums = vec![0.0f64; num_su];
        let mut sq_sums = vec![0.0f64; num_su];
        for _ in 0..mc_slots {
            let joint: Vec<usize> = strategies
                .iter()
                .map(|row| {
                    let u = rng.random::<f64>();
                    let mut acc = 0.0;
                    for (a, p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return a;
                        }
                    }
                    row.len() - 1
                })
                .collect();
            let pattern: Vec<bool> = (0..num_pu).map(|_| rng.random::<f64>() < kappa).collect();
            for (i, (_, r)) in joint_outcome(&topo, &radio, &joint, &pattern)
                .into_iter()
                .enumerate()
            {
                sums[i] += r;
                sq_sums[i] += r * r;
            }
        }
        for i in 0..num_su {
            let mean = sums[i] / mc_slots as f64;
            let var = (sq_sums[i] / mc_slots as f64 - mean * mean).max(0.0);
            let se = (var / mc_slots as f64).sqrt();
            let tol = 3.0 * se + 1e-9 * exact[i].abs().max(1.0);
            assert!(
                (exact[i] - mean).abs() <= tol,
                "instance {instance} agent {i}: exact {} vs MC {mean} (3se = {})",
                exact[i],
                3.0 * se
            );
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert_budget("criterion 7", elapsed, Duration::from_secs(60));
    println!(
        "acceptance 07 (exactness vs Monte Carlo): PASS — {checked} agent comparisons over 10 instances, {elapsed:?}"
    );
}

// Criterion 8: invariant property suites.
mod property_suites {
    use super::*;
    use proptest::prelude::*;
    use proptest::test_runner::{Config as PropConfig, TestRunner};

    fn runner(cases: u32) -> TestRunner {
        TestRunner::new(PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        })
    }

    fn two_link_topology(h11: f64, h22: f64, h12: f64, h21: f64) -> Topology {
        let mut gains_su = GainMatrix::zeros(2, 2);
        gains_su.set(0, 0, h11);
        gains_su.set(1, 1, h22);
        gains_su.set(0, 1, h12);
        gains_su.set(1, 0, h21);
        Topology {
            su_links: vec![
                (Pos { x: 0.0, y: 0.0 }, Pos { x: 5.0, y: 0.0 }),
                (Pos { x: 50.0, y: 0.0 }, Pos { x: 55.0, y: 0.0 }),
            ],
            pu_links: vec![],
            gains_su,
            gains_pu_to_su: GainMatrix::zeros(0, 2),
            area_side_m: 300.0,
        }
    }

    pub fn softmax_properties() {
        let strategy = (
            proptest::collection::vec(-1e8f64..1e8, 2..8),
            1e-3f64..1e9,
            -1e6f64..1e6,
        );
        runner(3000)
            .run(&strategy, |(q, tau, shift)| {
                let pi = boltzmann_strategy(&q, tau).unwrap();
                let sum: f64 = pi.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(pi.iter().all(|p| *p > 0.0));

                // Argmax consistency.
                let max_q = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let max_p = pi.iter().cloned().fold(0.0, f64::max);
                for (qi, pi_i) in q.iter().zip(&pi) {
                    if *qi == max_q {
                        prop_assert_eq!(*pi_i, max_p);
                    } else {
                        prop_assert!(*pi_i < max_p);
                    }
                }

                // Shift invariance.
                let shifted: Vec<f64> = q.iter().map(|x| x + shift).collect();
                let pi_shifted = boltzmann_strategy(&shifted, tau).unwrap();
                for (a, b) in pi.iter().zip(&pi_shifted) {
                    prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
                }
                Ok(())
            })
            .unwrap();

        // Exact ties produce exactly equal probabilities.
        runner(1000)
            .run(&(-1e6f64..1e6, 1e-2f64..1e6), |(v, tau)| {
                let pi = boltzmann_strategy(&[v, -1.0, v], tau).unwrap();
                prop_assert_eq!(pi[0], pi[2]);
                Ok(())
            })
            .unwrap();
    }

    pub fn sinr_properties() {
        let gains = || 1e-14f64..1e-6;
        let strategy = (
            gains(),
            gains(),
            gains(),
            gains(),
            0.05f64..0.2,
            0.05f64..0.2,
            1e-12f64..1e-8,
            0f64..1e-9,
            1.1f64..10.0,
        );
        runner(3000)
            .run(
                &strategy,
                |(h11, h22, h12, h21, p0, p1, noise, phi, scale)| {
                    let topo = two_link_topology(h11, h22, h12, h21);
                    let base = sinr(0, &[p0, p1], &topo, phi, noise);

                    // Strictly increasing in own power.
                    prop_assert!(sinr(0, &[p0 * scale, p1], &topo, phi, noise) > base);
                    // Strictly decreasing in each interference source.
                    prop_assert!(sinr(0, &[p0, p1 * scale], &topo, phi, noise) < base);
                    prop_assert!(sinr(0, &[p0, p1], &topo, phi + noise, noise) < base);
                    prop_assert!(sinr(0, &[p0, p1], &topo, phi, noise * scale) < base);

                    // Scale invariance of degree zero.
                    let scaled = sinr(
                        0,
                        &[p0 * scale, p1 * scale],
                        &topo,
                        phi * scale,
                        noise * scale,
                    );
                    prop_assert!((scaled - base).abs() <= 1e-9 * base);
                    Ok(())
                },
            )
            .unwrap();
    }

    pub fn power_level_properties() {
        let strategy = (1usize..8, 1e-3f64..0.15, 1e-4f64..0.2);
        runner(2000)
            .run(&strategy, |(m, p_min, extra)| {
                let p_max = p_min + extra;
                let levels: Vec<f64> = (0..=m)
                    .map(|a| power_level(a, m, p_min, p_max).unwrap())
                    .collect();
                prop_assert_eq!(levels.len(), m + 1);
                prop_assert!((levels[0] - p_min).abs() <= 1e-15);
                prop_assert!((levels[m] - p_max).abs() <= 1e-15);
                for w in levels.windows(2) {
                    prop_assert!(w[1] > w[0]);
                }
                // Equal spacing.
                let step = (p_max - p_min) / m as f64;
                for (a, l) in levels.iter().enumerate() {
                    prop_assert!((l - (p_min + step * a as f64)).abs() <= 1e-12 * p_max);
                }
                // State-index bijection over the 2(m+1) local states.
                for idx in 0..AgentState::count(m + 1) {
                    let st = AgentState::from_index(3, idx, m + 1);
                    prop_assert_eq!(st.index(m + 1), idx);
                }
                Ok(())
            })
            .unwrap();
    }

    pub fn q_boundedness() {
        let r_max = 1e7f64;
        let beta = 0.9f64;
        let bound = r_max / (1.0 - beta);
        let step = (
            0usize..4,
            0usize..2,
            0usize..4,
            0.0f64..1.0,
            0.0f64..=1.0,
            0.0f64..r_max,
        );
        let strategy = proptest::collection::vec(step, 1..200);
        runner(1000)
            .run(&strategy, |steps| {
                let mut q = QTable::zeros(4, 2);
                for (s, a, s_next, alpha, c, r) in steps {
                    q_update_conjecture(&mut q, s, a, r, c, s_next, alpha * 0.999, beta);
                }
                for v in q.as_slice() {
                    prop_assert!(*v >= 0.0 && *v <= bound * (1.0 + 1e-12));
                }
                Ok(())
            })
            .unwrap();
    }

    pub fn conjecture_fixed_point() {
        let strategy = (0.0f64..=1.0, 0.0f64..=1.0, 1e-3f64..10.0);
        runner(2000)
            .run(&strategy, |(c, pi, omega)| {
                // Stationary strategies leave the conjecture untouched.
                prop_assert_eq!(update_conjecture(c, pi, pi, omega), c.clamp(0.0, 1.0));
                Ok(())
            })
            .unwrap();
    }

    pub fn reward_monotonicity() {
        let strategy = (0.01f64..0.5, 0.0f64..1e4, 1.0f64..10.0, 1.01f64..4.0);
        runner(2000)
            .run(&strategy, |(p, gamma, gap, scale)| {
                let base = reward(p, gamma, 1e6, gap).unwrap();
                prop_assert!(reward(p, gamma + 1.0, 1e6, gap).unwrap() > base);
                if gamma > 0.0 {
                    prop_assert!(reward(p * scale, gamma, 1e6, gap).unwrap() < base);
                }
                Ok(())
            })
            .unwrap();
    }
}

#[test]
fn acceptance_08_invariant_property_suites() {
    let start = Instant::now();
    property_suites::softmax_properties();
    property_suites::sinr_properties();
    property_suites::power_level_properties();
    property_suites::q_boundedness();
    property_suites::conjecture_fixed_point();
    property_suites::reward_monotonicity();
    csv_determinism();
    let elapsed = start.elapsed();
    assert_budget("criterion 8", elapsed, Duration::from_secs(60));
    println!("acceptance 08 (invariant suites): PASS — softmax, SINR, power levels, Q bounds, conjecture fixed point, reward monotonicity, CSV determinism, {elapsed:?}");
}

/// Determinism of (config, seed) -> CSV bytes, including across thread
/// counts, exercised through the actual binary.
fn csv_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    std::fs::write(
        &config,
        r#"{
            "experiment_id": "determinism",
            "num_su": 2, "num_pu": 1,
            "power_levels": 2,
            "episode_length": 60,
            "num_episodes": 6,
            "base_seed": 4
        }"#,
    )
    .unwrap();

    let run = |out: &str, threads: Option<&str>| -> Vec<u8> {
        let out_path = dir.path().join(out);
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_cogmesh"));
        cmd.arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_path);
        match threads {
            Some(t) => cmd.env("COGMESH_THREADS", t),
            None => cmd.env("COGMESH_THREADS", "1"),
        };
        let status = cmd.status().expect("binary runs");
        assert!(status.success());
        std::fs::read(&out_path).unwrap()
    };

    let a = run("a.csv", None);
    let b = run("b.csv", None);
    assert_eq!(a, b, "same config and seed must give identical bytes");
    let c = run("c.csv", Some("3"));
    assert_eq!(a, c, "thread count must not change the bytes");

    // Different seed must change the contents.
    let out_d = dir.path().join("d.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_cogmesh"))
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--seed")
        .arg("5")
        .arg("--out")
        .arg(&out_d)
        .env("COGMESH_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    assert_ne!(a, std::fs::read(&out_d).unwrap());
}

// The two-agent instance wires together: probe-slot observation, one
// learning slot, and the documented record shape.
#[test]
fn acceptance_two_by_two_oracle_interfaces() {
    let (_, scenario) = load_scenario("two_by_two.json");
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        13,
        &scenario.channel,
        &scenario.geometry,
    )
    .unwrap();

    // Probe slot at lowest power, as run_episode initializes.
    let powers: Vec<f64> = scenario.radio.su.iter().map(|s| s.p_min_w).collect();
    let pattern = vec![false; scenario.num_pu];
    for i in 0..scenario.num_su {
        let phi = pu_interference(&pattern, &pu_gain_column(&topo, i), scenario.radio.pu_power_w);
        let gamma = sinr(i, &powers, &topo, phi, scenario.radio.noise_w);
        let st = observe_state(i, gamma, scenario.radio.su[i].qos_sinr, 0);
        assert_eq!(st.agent, i);
    }

    let mut agents = build_agents(&scenario, 13);
    let records = algorithm_slot(
        &mut agents,
        &topo,
        &scenario.radio,
        &pattern,
        0,
        UpdateRule::Conjecture,
    );
    assert_eq!(records.len(), scenario.num_su);
}

// Guard: the conjecture-init options match their definitions on a
// three-agent population (documented initialization behavior).
#[test]
fn acceptance_conjecture_initialization_modes() {
    let counts = [2usize, 3, 4];
    let learn = cogmesh::learning::LearnParams {
        beta: 0.9,
        tau: 1.0,
        alpha0: 0.5,
        theta: 1.002,
        alpha_min: 1e-4,
    };
    let agent = |init| {
        Agent::new(
            0,
            &counts,
            learn,
            cogmesh::learning::ConjectureMode::Linear,
            init,
            1.0,
            50,
            vec![0.1, 0.2],
            1.0,
            ChaCha8Rng::seed_from_u64(1),
        )
    };
    let neutral = agent(ConjectureInit::Neutral);
    assert!((neutral.conjecture.value(0, 0) - 0.5).abs() < 1e-15);
    let product = agent(ConjectureInit::ProductUniform);
    assert!((product.conjecture.value(0, 0) - (1.0 / 3.0) * (1.0 / 4.0)).abs() < 1e-15);
}

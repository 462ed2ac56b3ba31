//! Physical layer: topology generation, channel gains, PU activity,
//! SINR, energy-efficiency reward, and the local state observation.
//!
//! All powers are in watts internally. Distances are in meters, gains are
//! dimensionless. Channel gains are drawn once per topology and frozen for
//! the whole run (slow fading relative to the power-control timescale).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A point in the deployment area, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pos {
    pub x: f64,
    pub y: f64,
}

impl Pos {
    pub fn dist(&self, other: &Pos) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Dense row-major matrix of channel gains. `get(j, i)` is the gain from the
/// transmitter of link `j` to the receiver of link `i`; it is not symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GainMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Path-loss / lognormal-shadowing channel model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Gain constant at the reference distance.
    pub k: f64,
    /// Path loss exponent.
    pub path_loss_exp: f64,
    /// Reference distance, meters. The gain formula is valid only beyond it.
    pub d0_m: f64,
    /// Mean of the shadowing term in dB.
    pub shadow_mean_db: f64,
    /// Standard deviation of the shadowing term in dB.
    pub shadow_std_db: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::config("channel.k", "must be > 0"));
        }
        if !(self.path_loss_exp > 0.0) {
            return Err(Error::config("channel.path_loss_exp", "must be > 0"));
        }
        if !(self.d0_m > 0.0) {
            return Err(Error::config("channel.d0_m", "must be > 0"));
        }
        if !(self.shadow_std_db >= 0.0) {
            return Err(Error::config("channel.shadow_std_db", "must be >= 0"));
        }
        Ok(())
    }
}

/// Deployment geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Side of the square deployment area, meters.
    pub area_side_m: f64,
    /// Maximum transmitter-receiver distance for a direct link, meters.
    pub link_range_m: f64,
    /// Rejection-sampling budget per link before giving up.
    pub placement_retries: usize,
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_side_m > 0.0) {
            return Err(Error::config("area_side_m", "must be > 0"));
        }
        if !(self.link_range_m > 0.0) {
            return Err(Error::config("link_range_m", "must be > 0"));
        }
        if self.placement_retries == 0 {
            return Err(Error::config("placement_retries", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-SU transmit-power configuration. `levels` is the number of discrete
/// power actions (at least 2 for a non-degenerate action set).
#[derive(Debug, Clone, PartialEq)]
pub struct SuParams {
    pub p_min_w: f64,
    pub p_max_w: f64,
    /// SINR threshold below which the receiver decodes nothing.
    pub qos_sinr: f64,
    /// Number of discrete power levels, i.e. action count.
    pub levels: usize,
}

/// Radio-wide parameters shared by all links.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    /// AWGN power at every receiver, watts.
    pub noise_w: f64,
    /// SNR gap between the modulation scheme and capacity; >= 1.
    pub snr_gap: f64,
    /// Fixed PU transmit power, watts.
    pub pu_power_w: f64,
    /// Per-slot transmission probability of each PU.
    pub pu_activity: f64,
    /// Hard per-device transmit power cap protecting the PUs, watts.
    pub power_mask_w: f64,
    pub su: Vec<SuParams>,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz", "must be > 0"));
        }
        if !(self.noise_w > 0.0) {
            return Err(Error::config("noise", "must be > 0"));
        }
        if !(self.snr_gap >= 1.0) {
            return Err(Error::config("gap", "must be >= 1"));
        }
        if !(self.pu_power_w > 0.0) {
            return Err(Error::config("pu_power", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.pu_activity) {
            return Err(Error::config("pu_activity", "must be within [0, 1]"));
        }
        if !(self.power_mask_w > 0.0) {
            return Err(Error::config("power_mask", "must be > 0"));
        }
        for (i, su) in self.su.iter().enumerate() {
            let field = |name: &str| format!("su[{i}].{name}");
            if su.levels < 2 {
                return Err(Error::config(field("levels"), "must be >= 2"));
            }
            if !(su.qos_sinr > 0.0) {
                return Err(Error::config(field("qos_sinr"), "must be > 0"));
            }
            let p_max_eff = su.p_max_w.min(self.power_mask_w);
            if !(su.p_min_w > 0.0 && su.p_min_w <= p_max_eff) {
                return Err(Error::config(
                    field("p_min"),
                    "must satisfy 0 < p_min <= min(p_max, power_mask)",
                ));
            }
        }
        Ok(())
    }

    /// Effective upper power limit of SU `i`: its own cap clipped by the mask.
    pub fn p_max_eff(&self, i: usize) -> f64 {
        self.su[i].p_max_w.min(self.power_mask_w)
    }

    pub fn num_su(&self) -> usize {
        self.su.len()
    }
}

/// Frozen deployment: link endpoints and all pairwise channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// SU links as (transmitter, receiver) pairs.
    pub su_links: Vec<(Pos, Pos)>,
    /// PU links as (transmitter, receiver) pairs.
    pub pu_links: Vec<(Pos, Pos)>,
    /// `gains_su.get(j, i)` = gain from SU transmitter j to SU receiver i.
    pub gains_su: GainMatrix,
    /// `gains_pu_to_su.get(m, i)` = gain from PU transmitter m to SU receiver i.
    pub gains_pu_to_su: GainMatrix,
    pub area_side_m: f64,
}

impl Topology {
    pub fn num_su(&self) -> usize {
        self.su_links.len()
    }

    pub fn num_pu(&self) -> usize {
        self.pu_links.len()
    }

    /// Checks the structural invariants: positive finite gains and all link
    /// distances within `link_range_m`.
    pub fn validate(&self, link_range_m: f64) -> Result<()> {
        for g in self
            .gains_su
            .as_slice()
            .iter()
            .chain(self.gains_pu_to_su.as_slice())
        {
            if !(g.is_finite() && *g > 0.0) {
                return Err(Error::Domain(format!(
                    "topology contains a non-positive or non-finite gain: {g}"
                )));
            }
        }
        for (tx, rx) in self.su_links.iter().chain(&self.pu_links) {
            if tx.dist(rx) > link_range_m {
                return Err(Error::Domain(format!(
                    "link distance {} exceeds range {link_range_m}",
                    tx.dist(rx)
                )));
            }
        }
        Ok(())
    }
}

/// Link gain `K * F * (d / d0)^(-n)` for `d > d0`, where `F` is the
/// (linear-scale) shadowing factor.
pub fn link_gain(d_m: f64, shadow_f: f64, params: &ChannelParams) -> Result<f64> {
    if !(d_m > params.d0_m) {
        return Err(Error::Domain(format!(
            "link_gain requires d > d0 ({} <= {})",
            d_m, params.d0_m
        )));
    }
    if !(shadow_f > 0.0) {
        return Err(Error::Domain(format!(
            "link_gain requires a positive shadowing factor, got {shadow_f}"
        )));
    }
    Ok(params.k * shadow_f * (d_m / params.d0_m).powf(-params.path_loss_exp))
}

/// One lognormal shadowing draw: `F = 10^(X/10)` with `X ~ Normal(mean, std)` in dB.
fn shadow_factor(rng: &mut ChaCha8Rng, params: &ChannelParams) -> f64 {
    let x_db = if params.shadow_std_db > 0.0 {
        let normal = Normal::new(params.shadow_mean_db, params.shadow_std_db)
            .expect("validated shadowing parameters");
        normal.sample(rng)
    } else {
        params.shadow_mean_db
    };
    10f64.powf(x_db / 10.0)
}

fn in_area(p: &Pos, side: f64) -> bool {
    p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side
}

/// Places one link: the transmitter uniform over the area, the receiver
/// uniform over the disc of radius `link_range_m` around it, conditioned on
/// the receiver lying inside the area and beyond `d0` (where the gain model
/// is defined). `clear_of_rx` are receivers the transmitter must be at least
/// `d0` away from, `clear_of_tx` the transmitters the receiver must clear.
fn place_link(
    rng: &mut ChaCha8Rng,
    geom: &GeometryConfig,
    d0_m: f64,
    clear_of_rx: &[Pos],
    clear_of_tx: &[Pos],
) -> Result<(Pos, Pos)> {
    for _ in 0..geom.placement_retries {
        let tx = Pos {
            x: rng.random::<f64>() * geom.area_side_m,
            y: rng.random::<f64>() * geom.area_side_m,
        };
        let r = geom.link_range_m * rng.random::<f64>().sqrt();
        let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let rx = Pos {
            x: tx.x + r * angle.cos(),
            y: tx.y + r * angle.sin(),
        };
        if r <= d0_m || !in_area(&rx, geom.area_side_m) {
            continue;
        }
        if clear_of_rx.iter().any(|p| tx.dist(p) <= d0_m) {
            continue;
        }
        if clear_of_tx.iter().any(|p| rx.dist(p) <= d0_m) {
            continue;
        }
        return Ok((tx, rx));
    }
    Err(Error::config(
        "placement_retries",
        format!(
            "could not place a link within {} retries; area too crowded for the given range",
            geom.placement_retries
        ),
    ))
}

/// Generates a deployment deterministically from `seed`: uniform node
/// placement, per-ordered-pair lognormal shadowing drawn once and frozen.
pub fn generate_topology(
    num_su: usize,
    num_pu: usize,
    seed: u64,
    channel: &ChannelParams,
    geom: &GeometryConfig,
) -> Result<Topology> {
    if num_su == 0 {
        return Err(Error::config("num_su", "must be >= 1"));
    }
    channel.validate()?;
    geom.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut su_links: Vec<(Pos, Pos)> = Vec::with_capacity(num_su);
    for _ in 0..num_su {
        let txs: Vec<Pos> = su_links.iter().map(|l| l.0).collect();
        let rxs: Vec<Pos> = su_links.iter().map(|l| l.1).collect();
        su_links.push(place_link(&mut rng, geom, channel.d0_m, &rxs, &txs)?);
    }
    let su_rxs: Vec<Pos> = su_links.iter().map(|l| l.1).collect();

    let mut pu_links: Vec<(Pos, Pos)> = Vec::with_capacity(num_pu);
    for _ in 0..num_pu {
        // Only the PU transmitter couples into SU receivers, so that is the
        // only clearance it needs.
        pu_links.push(place_link(&mut rng, geom, channel.d0_m, &su_rxs, &[])?);
    }

    let mut gains_su = GainMatrix::zeros(num_su, num_su);
    for j in 0..num_su {
        for i in 0..num_su {
            let d = su_links[j].0.dist(&su_links[i].1);
            let f = shadow_factor(&mut rng, channel);
            gains_su.set(j, i, link_gain(d, f, channel)?);
        }
    }
    let mut gains_pu_to_su = GainMatrix::zeros(num_pu, num_su);
    for m in 0..num_pu {
        for i in 0..num_su {
            let d = pu_links[m].0.dist(&su_links[i].1);
            let f = shadow_factor(&mut rng, channel);
            gains_pu_to_su.set(m, i, link_gain(d, f, channel)?);
        }
    }

    Ok(Topology {
        su_links,
        pu_links,
        gains_su,
        gains_pu_to_su,
        area_side_m: geom.area_side_m,
    })
}

/// Discrete power level for action index `a` out of `m + 1` equally spaced
/// levels between `p_min` and the effective maximum.
pub fn power_level(a: usize, m: usize, p_min_w: f64, p_max_eff_w: f64) -> Result<f64> {
    if a > m {
        return Err(Error::Index(format!(
            "action index {a} out of range 0..={m}"
        )));
    }
    let frac = a as f64 / m as f64;
    Ok((1.0 - frac) * p_min_w + frac * p_max_eff_w)
}

/// Total PU-to-SU interference at one receiver given the active-PU pattern.
pub fn pu_interference(active: &[bool], gains_to_rx: &[f64], pu_power_w: f64) -> f64 {
    debug_assert_eq!(active.len(), gains_to_rx.len());
    active
        .iter()
        .zip(gains_to_rx)
        .filter(|(on, _)| **on)
        .map(|(_, g)| g * pu_power_w)
        .sum()
}

/// Column of PU gains into the receiver of SU `i`.
pub fn pu_gain_column(topo: &Topology, i: usize) -> Vec<f64> {
    (0..topo.num_pu())
        .map(|m| topo.gains_pu_to_su.get(m, i))
        .collect()
}

/// SINR at the receiver of SU `i` under the joint SU power vector and the
/// given PU interference.
pub fn sinr(
    i: usize,
    powers_w: &[f64],
    topo: &Topology,
    pu_interference_w: f64,
    noise_w: f64,
) -> f64 {
    debug_assert_eq!(powers_w.len(), topo.num_su());
    let mut interference = 0.0;
    for (j, p) in powers_w.iter().enumerate() {
        if j != i {
            interference += topo.gains_su.get(j, i) * p;
        }
    }
    topo.gains_su.get(i, i) * powers_w[i] / (noise_w + pu_interference_w + interference)
}

/// Energy-efficiency reward: bits received correctly per joule.
pub fn reward(power_w: f64, sinr: f64, bandwidth_hz: f64, snr_gap: f64) -> Result<f64> {
    if !(power_w > 0.0) {
        return Err(Error::Domain(format!(
            "reward requires a positive transmit power, got {power_w}"
        )));
    }
    debug_assert!(sinr >= 0.0);
    Ok(reward_raw(power_w, sinr, bandwidth_hz, snr_gap))
}

#[inline]
pub(crate) fn reward_raw(power_w: f64, sinr: f64, bandwidth_hz: f64, snr_gap: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr / snr_gap).log2() / power_w
}

/// Reward actually collected in a slot: zero when the SINR misses the QoS
/// threshold (the receiver decodes nothing), the full reward otherwise.
/// The boundary counts as satisfied.
pub fn realized_reward(
    power_w: f64,
    sinr: f64,
    qos_sinr: f64,
    bandwidth_hz: f64,
    snr_gap: f64,
) -> Result<f64> {
    if sinr >= qos_sinr {
        reward(power_w, sinr, bandwidth_hz, snr_gap)
    } else {
        Ok(0.0)
    }
}

#[inline]
pub(crate) fn realized_reward_raw(
    power_w: f64,
    sinr: f64,
    qos_sinr: f64,
    bandwidth_hz: f64,
    snr_gap: f64,
) -> f64 {
    if sinr >= qos_sinr {
        reward_raw(power_w, sinr, bandwidth_hz, snr_gap)
    } else {
        0.0
    }
}

/// Local observation of one agent: QoS indicator plus its own last action.
/// The per-agent state space therefore has exactly `2 * (m + 1)` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentState {
    pub agent: usize,
    pub qos_ok: bool,
    pub action: usize,
}

impl AgentState {
    /// Dense index within the agent's `2 * num_actions` states.
    pub fn index(&self, num_actions: usize) -> usize {
        debug_assert!(self.action < num_actions);
        (self.qos_ok as usize) * num_actions + self.action
    }

    pub fn from_index(agent: usize, index: usize, num_actions: usize) -> Self {
        debug_assert!(index < 2 * num_actions);
        AgentState {
            agent,
            qos_ok: index >= num_actions,
            action: index % num_actions,
        }
    }

    pub fn count(num_actions: usize) -> usize {
        2 * num_actions
    }
}

/// Builds the next local state from the measured SINR.
pub fn observe_state(agent: usize, sinr: f64, qos_sinr: f64, action: usize) -> AgentState {
    AgentState {
        agent,
        qos_ok: sinr >= qos_sinr,
        action,
    }
}

//! Configuration schema: a versioned JSON document that fully determines an
//! experiment. Unknown keys are rejected, every numeric range is validated
//! before any run, and the applied defaults are echoed back into the output
//! metadata so a result file is reproducible from its own header.
//!
//! Powers in the document are given in the configured `power_unit`
//! (milliwatts by default, matching how hardware specs are quoted) and
//! converted to watts internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Scenario, SweepParam, TopologyPolicy};
use crate::learning::{ConjectureInit, ConjectureMode, LearnParams};
use crate::radio::{ChannelParams, GeometryConfig, RadioParams, SuParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PowerUnit {
    Mw,
    W,
}

impl PowerUnit {
    fn to_watts(&self, value: f64) -> f64 {
        match self {
            PowerUnit::Mw => value * 1e-3,
            PowerUnit::W => value,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_path_loss_exp")]
    pub path_loss_exp: f64,
    #[serde(default = "default_d0_m")]
    pub d0_m: f64,
    #[serde(default)]
    pub shadow_mean_db: f64,
    /// Spread of the lognormal shadowing in dB. Interpreted as the standard
    /// deviation unless `shadow_db_is_variance` is set.
    #[serde(default = "default_shadow_db")]
    pub shadow_db: f64,
    #[serde(default)]
    pub shadow_db_is_variance: bool,
}

fn default_k() -> f64 {
    1e-6
}
fn default_path_loss_exp() -> f64 {
    4.0
}
fn default_d0_m() -> f64 {
    1.0
}
fn default_shadow_db() -> f64 {
    6.0
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            k: default_k(),
            path_loss_exp: default_path_loss_exp(),
            d0_m: default_d0_m(),
            shadow_mean_db: 0.0,
            shadow_db: default_shadow_db(),
            shadow_db_is_variance: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_alpha_min")]
    pub alpha_min: f64,
}

fn default_beta() -> f64 {
    0.9
}
fn default_tau() -> f64 {
    1e5
}
fn default_alpha0() -> f64 {
    0.5
}
fn default_theta() -> f64 {
    1.002
}
fn default_alpha_min() -> f64 {
    1e-4
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            beta: default_beta(),
            tau: default_tau(),
            alpha0: default_alpha0(),
            theta: default_theta(),
            alpha_min: default_alpha_min(),
        }
    }
}

/// Optional per-SU overrides; scalars from the top level apply otherwise.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SuConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub qos_sinr: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum TopologyPolicyConfig {
    PerEpisode,
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ConjectureModeConfig {
    Linear,
    History,
    Hybrid,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ConjectureInitConfig {
    Neutral,
    ProductUniform,
}

/// The complete experiment description. Every field has a default; the
/// defaults describe a three-SU, three-PU deployment with two power levels.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default = "default_experiment_id")]
    pub experiment_id: String,
    #[serde(default = "default_num_su")]
    pub num_su: usize,
    #[serde(default = "default_num_pu")]
    pub num_pu: usize,
    #[serde(default = "default_area_side_m")]
    pub area_side_m: f64,
    #[serde(default = "default_link_range_m")]
    pub link_range_m: f64,
    #[serde(default = "default_placement_retries")]
    pub placement_retries: usize,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default = "default_bandwidth_hz")]
    pub bandwidth_hz: f64,
    /// AWGN power in `power_unit`.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// SNR gap between the modulation scheme and capacity.
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// PU transmit power in `power_unit`.
    #[serde(default = "default_pu_power")]
    pub pu_power: f64,
    /// Per-slot transmission probability of each PU.
    #[serde(default = "default_pu_activity")]
    pub pu_activity: f64,
    /// Power mask in `power_unit`.
    #[serde(default = "default_power_mask")]
    pub power_mask: f64,
    /// Lowest SU transmit level in `power_unit`.
    #[serde(default = "default_su_power_min")]
    pub su_power_min: f64,
    /// Highest SU transmit level in `power_unit`.
    #[serde(default = "default_su_power_max")]
    pub su_power_max: f64,
    /// Number of discrete SU power levels.
    #[serde(default = "default_power_levels")]
    pub power_levels: usize,
    /// SINR threshold for adequate QoS.
    #[serde(default = "default_qos_sinr")]
    pub qos_sinr: f64,
    #[serde(default = "default_power_unit")]
    pub power_unit: PowerUnit,
    /// Optional per-SU overrides (length must equal `num_su`).
    #[serde(default)]
    pub su_params: Option<Vec<SuConfig>>,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default = "default_conjecture_mode")]
    pub conjecture_mode: ConjectureModeConfig,
    #[serde(default = "default_conjecture_init")]
    pub conjecture_init: ConjectureInitConfig,
    #[serde(default = "default_conjecture_omega")]
    pub conjecture_omega: f64,
    #[serde(default = "default_history_window")]
    pub history_window: usize,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
    #[serde(default = "default_num_episodes")]
    pub num_episodes: usize,
    #[serde(default = "default_topology_policy")]
    pub topology_policy: TopologyPolicyConfig,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_experiment_id() -> String {
    "run".to_string()
}
fn default_num_su() -> usize {
    3
}
fn default_num_pu() -> usize {
    3
}
fn default_area_side_m() -> f64 {
    300.0
}
fn default_link_range_m() -> f64 {
    30.0
}
fn default_placement_retries() -> usize {
    1000
}
fn default_bandwidth_hz() -> f64 {
    1e6
}
fn default_noise() -> f64 {
    1e-7
}
fn default_gap() -> f64 {
    1.0
}
fn default_pu_power() -> f64 {
    200.0
}
fn default_pu_activity() -> f64 {
    0.5
}
fn default_power_mask() -> f64 {
    200.0
}
fn default_su_power_min() -> f64 {
    100.0
}
fn default_su_power_max() -> f64 {
    200.0
}
fn default_power_levels() -> usize {
    2
}
fn default_qos_sinr() -> f64 {
    1.0
}
fn default_power_unit() -> PowerUnit {
    PowerUnit::Mw
}
fn default_conjecture_mode() -> ConjectureModeConfig {
    ConjectureModeConfig::Linear
}
fn default_conjecture_init() -> ConjectureInitConfig {
    ConjectureInitConfig::Neutral
}
fn default_conjecture_omega() -> f64 {
    1.0
}
fn default_history_window() -> usize {
    50
}
fn default_episode_length() -> usize {
    2000
}
fn default_num_episodes() -> usize {
    200
}
fn default_topology_policy() -> TopologyPolicyConfig {
    TopologyPolicyConfig::PerEpisode
}
fn default_tail_fraction() -> f64 {
    0.1
}
fn default_base_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty document yields the defaults")
    }
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (tool expects {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if let Some(su) = &self.su_params {
            if su.len() != self.num_su {
                return Err(Error::config(
                    "su_params",
                    format!("expected {} entries, got {}", self.num_su, su.len()),
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            SweepParam::parse(&sweep.param)?;
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
        }
        // Range checks happen on the converted scenario so that per-SU
        // overrides and unit conversion are covered too.
        self.to_scenario()?.validate()
    }

    /// Converts the document into a runnable scenario, applying the power
    /// unit.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let unit = &self.power_unit;
        let su: Vec<SuParams> = match &self.su_params {
            Some(list) => list
                .iter()
                .map(|s| SuParams {
                    p_min_w: unit.to_watts(s.p_min),
                    p_max_w: unit.to_watts(s.p_max),
                    qos_sinr: s.qos_sinr,
                    levels: s.levels,
                })
                .collect(),
            None => (0..self.num_su)
                .map(|_| SuParams {
                    p_min_w: unit.to_watts(self.su_power_min),
                    p_max_w: unit.to_watts(self.su_power_max),
                    qos_sinr: self.qos_sinr,
                    levels: self.power_levels,
                })
                .collect(),
        };
        let shadow_std_db = if self.channel.shadow_db_is_variance {
            self.channel.shadow_db.sqrt()
        } else {
            self.channel.shadow_db
        };
        Ok(Scenario {
            num_su: self.num_su,
            num_pu: self.num_pu,
            geometry: GeometryConfig {
                area_side_m: self.area_side_m,
                link_range_m: self.link_range_m,
                placement_retries: self.placement_retries,
            },
            channel: ChannelParams {
                k: self.channel.k,
                path_loss_exp: self.channel.path_loss_exp,
                d0_m: self.channel.d0_m,
                shadow_mean_db: self.channel.shadow_mean_db,
                shadow_std_db,
            },
            radio: RadioParams {
                bandwidth_hz: self.bandwidth_hz,
                noise_w: unit.to_watts(self.noise),
                snr_gap: self.gap,
                pu_power_w: unit.to_watts(self.pu_power),
                pu_activity: self.pu_activity,
                power_mask_w: unit.to_watts(self.power_mask),
                su,
            },
            learn: LearnParams {
                beta: self.learn.beta,
                tau: self.learn.tau,
                alpha0: self.learn.alpha0,
                theta: self.learn.theta,
                alpha_min: self.learn.alpha_min,
            },
            conjecture_mode: match self.conjecture_mode {
                ConjectureModeConfig::Linear => ConjectureMode::Linear,
                ConjectureModeConfig::History => ConjectureMode::History,
                ConjectureModeConfig::Hybrid => ConjectureMode::Hybrid,
            },
            conjecture_init: match self.conjecture_init {
                ConjectureInitConfig::Neutral => ConjectureInit::Neutral,
                ConjectureInitConfig::ProductUniform => ConjectureInit::ProductUniform,
            },
            conjecture_omega: self.conjecture_omega,
            history_window: self.history_window,
            episode_length: self.episode_length,
            num_episodes: self.num_episodes,
            topology_policy: match self.topology_policy {
                TopologyPolicyConfig::PerEpisode => TopologyPolicy::PerEpisode,
                TopologyPolicyConfig::Fixed => TopologyPolicy::Fixed,
            },
            tail_fraction: self.tail_fraction,
        })
    }

    /// Canonical single-line JSON echo of the document with defaults applied.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_applies_documented_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c.num_su, 3);
        assert_eq!(c.num_pu, 3);
        assert_eq!(c.pu_activity, 0.5);
        assert_eq!(c.power_levels, 2);
        assert_eq!(c.num_episodes, 200);
        assert_eq!(c.episode_length, 2000);
        assert_eq!(c.learn.beta, 0.9);
        let s = c.to_scenario().unwrap();
        // 100 mW / 200 mW converted to watts.
        assert_eq!(s.radio.su[0].p_min_w, 0.1);
        assert_eq!(s.radio.su[0].p_max_w, 0.2);
        assert_eq!(s.radio.noise_w, 1e-10);
    }

    #[test]
    fn out_of_range_activity_names_the_field() {
        let err = parse_config(r#"{"pu_activity": 1.5}"#).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "pu_activity"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = parse_config(r#"{"pu_activty": 0.5}"#).unwrap_err();
        match err {
            Error::ConfigParse(msg) => assert!(msg.contains("pu_activty"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let err = parse_config("{\n  \"num_su\": oops\n}").unwrap_err();
        match err {
            Error::ConfigParse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn watt_unit_skips_conversion() {
        let c = parse_config(
            r#"{"power_unit": "w", "su_power_min": 0.1, "su_power_max": 0.2,
                "pu_power": 0.2, "power_mask": 0.2, "noise": 1e-10}"#,
        )
        .unwrap();
        let s = c.to_scenario().unwrap();
        assert_eq!(s.radio.su[0].p_min_w, 0.1);
        assert_eq!(s.radio.noise_w, 1e-10);
    }

    #[test]
    fn shadow_variance_interpretation_is_selectable() {
        let c = parse_config(r#"{"channel": {"shadow_db": 6.0, "shadow_db_is_variance": true}}"#)
            .unwrap();
        let s = c.to_scenario().unwrap();
        assert!((s.channel.shadow_std_db - 6.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn per_su_overrides_must_match_count() {
        let err = parse_config(
            r#"{"num_su": 2, "su_params": [{"p_min": 100, "p_max": 200, "qos_sinr": 1.0, "levels": 2}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "su_params"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_echo_round_trips() {
        let c = parse_config(r#"{"num_su": 4, "pu_activity": 0.25, "su_power_min": 120}"#).unwrap();
        let echoed = parse_config(&c.canonical_json()).unwrap();
        assert_eq!(c, echoed);
    }

    #[test]
    fn sweep_param_is_validated() {
        let err =
            parse_config(r#"{"sweep": {"param": "bogus", "values": [1.0]}}"#).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "sweep.param"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}

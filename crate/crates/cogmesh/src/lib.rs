//! Seeded, deterministic simulator of non-cooperative power allocation in a
//! cognitive wireless mesh network.
//!
//! Secondary-user links share one band with licensed primary users and learn
//! mixed transmit-power strategies by tabular Q-learning, each weighting its
//! reward by a private conjecture about the other links' behavior. An exact
//! enumeration layer (joint-power optima, expected rewards under mixed
//! strategies, equilibrium checks, a contraction probe of the learning
//! backup) validates the stochastic learner at desk scale.
//!
//! Modules:
//! - [`radio`]: topology, channel gains, SINR, energy-efficiency rewards.
//! - [`learning`]: Q-tables, Boltzmann strategies, conjectures, slot loop.
//! - [`oracle`]: exhaustive enumeration and verification tools.
//! - [`harness`]: seeded episodes, experiment averaging, parameter sweeps.
//! - [`config`], [`output`], [`cli`]: JSON config, CSV output, command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod learning;
pub mod oracle;
pub mod output;
pub mod radio;

pub use error::{Error, Result};

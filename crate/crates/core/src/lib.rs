//! Battery energy arbitrage in a hybrid AC/DC microgrid, controlled by the
//! DQN family of value-based agents (up to and including Rainbow) and
//! benchmarked against DDPG and a linear-programming schedule.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: hourly time series (CSV ingestion or synthetic generation) and
//!   observation scaling.
//! - [`env`]: the single-step microgrid simulator and its reward.
//! - [`nn`]: a small feedforward network engine with exact gradients.
//! - [`agents`]: DQN, DDQN, D3QN, PER, multistep, NoisyNet, C51 and Rainbow.
//! - [`forecast`]: next-hour regression forecasters used by the forecasting
//!   scenarios.
//! - [`baselines`]: DDPG, the constant-efficiency LP and its simplex solver,
//!   and a brute-force schedule oracle.
//! - [`harness`]: experiment configuration, the train/evaluate protocol and
//!   result aggregation.

pub mod agents;
pub mod baselines;
pub mod data;
pub mod env;
pub mod forecast;
pub mod harness;
pub mod nn;
pub mod rng;

/// Hours in one episode (one week of hourly data).
pub const HOURS_PER_WEEK: usize = 168;

//! Continuous-control benchmarks: DDPG and the constant-efficiency linear
//! program, plus an exhaustive search oracle.

mod ddpg;
mod lp;
pub mod simplex;

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::nn::NnError;

pub use ddpg::{DdpgAgent, DdpgConfig, DdpgTransition};
pub use lp::{
    brute_force_schedule, build_lp, replay_schedule, replay_simplified, solve_lp, solve_lp_blocks,
    LpConfig, LpProblem, LpSolution, ReplayReport, Schedule, BRUTE_FORCE_LIMIT,
};
pub use simplex::SimplexError;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid baseline config: {0}")]
    Config(String),
    #[error("schedule has {schedule} hours, {available} available")]
    LengthMismatch { schedule: usize, available: usize },
    #[error("{count} schedules exceed the enumeration limit")]
    CombinatorialLimit { count: f64 },
    #[error("LP solver: {0}")]
    Solver(#[from] SimplexError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("schedule csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schedule io: {0}")]
    Io(#[from] std::io::Error),
}

//! The DQN family as composable components over [`crate::nn`].

mod categorical;
mod config;
mod dqn;
mod per;
mod policy;
mod replay;

use thiserror::Error;

use crate::nn::NnError;

pub use categorical::{categorical_projection, kl_loss, Support};
pub use config::{AgentConfig, Algorithm, Flags};
pub use dqn::{ActionInfo, DqnAgent, Mode, PlainDqn};
pub use per::{PrioritizedBuffer, PrioritizedSample};
pub use policy::{argmax, ddqn_target, dqn_target, epsilon_decay, select_action};
pub use replay::{multistep_return, NStepBuffer, ReplayBuffer, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("buffer holds {have} transitions, {need} required")]
    Underfull { have: usize, need: usize },
    #[error("multistep window has {have} rewards, {need} required")]
    ShortWindow { have: usize, need: usize },
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("action {0} out of range")]
    InvalidAction(usize),
    #[error("observation length does not match the network")]
    Shape,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

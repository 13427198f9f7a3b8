//! Independent learners and the network substrate they share.

mod adam;
mod checkpoint;
mod dqn;
pub mod nn;
mod ppo;
mod replay;
mod schedule;
mod tabular;

pub use adam::Adam;
pub use checkpoint::{load_mlp, save_mlp, CHECKPOINT_MAGIC};
pub use dqn::{dqn_loss_and_grad, huber, huber_grad, DqnAgent, DqnConfig};
pub use nn::{Activation, ForwardCache, Mlp};
pub use ppo::{
    actor_loss_and_grad, clipped_surrogate, critic_loss_and_grad, monte_carlo_returns,
    normalize_advantages, ppo_ratio, PpoAgent, PpoConfig, PpoLosses, RolloutStep,
};
pub use replay::{Experience, ReplayBuffer};
pub use schedule::EpsilonSchedule;
pub use tabular::{q_update, QTable, TabularConfig, TabularQ};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{Observation, SmgRng};

/// What a learner receives after each step. `reward` is the post-market
/// reward.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub obs: &'a Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: &'a Observation,
    pub done: bool,
}

pub trait Learner: Send {
    fn n_actions(&self) -> usize;

    fn act(&mut self, obs: &Observation, rng: &mut SmgRng) -> usize;

    fn learn(&mut self, t: &Transition<'_>, rng: &mut SmgRng) -> Result<()>;

    /// Flat view of all learned parameters, for determinism checks.
    fn parameters(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Tabular,
    Dqn,
    Ppo,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Tabular => "tabular",
            LearnerKind::Dqn => "dqn",
            LearnerKind::Ppo => "ppo",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tabular" | "q" | "iql" => Ok(LearnerKind::Tabular),
            "dqn" | "idqn" => Ok(LearnerKind::Dqn),
            "ppo" => Ok(LearnerKind::Ppo),
            other => Err(crate::error::Error::Config(format!("unknown learner '{other}'"))),
        }
    }
}

/// With probability `eps` a uniform action, otherwise the greedy action
/// with ties broken towards the lowest index.
pub fn epsilon_greedy(q_values: &[f64], eps: f64, rng: &mut impl Rng) -> usize {
    assert!(!q_values.is_empty(), "empty action set");
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q_values.len())
    } else {
        nn::argmax(q_values)
    }
}

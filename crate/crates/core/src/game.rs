//! Stochastic-game abstraction shared by every environment and learner.
//!
//! An [`Environment`] owns its opaque state; the market layer owns the
//! balance sheet and share registry that together with it make up the full
//! game state. Environments are driven one joint environmental action at a
//! time and report a per-agent [`RewardVector`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::BalanceSheet;

/// Random source used everywhere in the crate. ChaCha8 gives cheap
/// independent streams from one seed.
pub type SmgRng = ChaCha8Rng;

/// Per-agent rewards for one step, in environment units.
pub type RewardVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvAction(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DiscountFactor(f64);

impl DiscountFactor {
    pub fn new(gamma: f64) -> Result<Self> {
        if (0.0..1.0).contains(&gamma) {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidDiscount(gamma))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `sum_t gamma^(t-1) r_t` with `t` starting at 1.
pub fn discounted_return(rewards: &[f64], gamma: DiscountFactor) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma.0;
    }
    total
}

/// Rescales `value` to `[0, 1]` given the achievable range.
pub fn normalize_return(value: f64, min_possible: f64, max_possible: f64) -> Result<f64> {
    if max_possible.partial_cmp(&min_possible) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateRange {
            min: min_possible,
            max: max_possible,
        });
    }
    Ok(((value - min_possible) / (max_possible - min_possible)).clamp(0.0, 1.0))
}

/// Role label attached to an agent for reporting and distribution analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentGroup {
    High,
    Low,
    Refiner,
    Consumer,
    Player(usize),
}

impl AgentGroup {
    pub fn label(&self) -> String {
        match self {
            AgentGroup::High => "high".into(),
            AgentGroup::Low => "low".into(),
            AgentGroup::Refiner => "refiner".into(),
            AgentGroup::Consumer => "consumer".into(),
            AgentGroup::Player(i) => format!("player{}", i + 1),
        }
    }

    /// Whether the agent sits on the high-reward side of its environment:
    /// high-priority tasks, consumers of refined units, the first player of
    /// a matrix game.
    pub fn is_high_tier(&self) -> bool {
        matches!(
            self,
            AgentGroup::High | AgentGroup::Consumer | AgentGroup::Player(0)
        )
    }
}

/// What an agent sees before acting. Tabular learners use `key`,
/// function approximators use `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub key: u64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: RewardVector,
    pub done: bool,
}

pub trait Environment: Send {
    fn n_agents(&self) -> usize;

    fn n_env_actions(&self) -> usize;

    fn reset(&mut self, rng: &mut SmgRng);

    /// Advances the environment by one joint environmental action.
    /// Stepping a finished episode yields [`Error::EpisodeDone`].
    fn step(&mut self, actions: &[EnvAction], rng: &mut SmgRng) -> Result<StepOutcome>;

    fn observe(&self, agent: AgentId, balance: &BalanceSheet) -> Observation;

    fn observation_len(&self) -> usize;

    /// Smallest and largest achievable overall (summed over agents) return
    /// of the current episode; used as normalization bounds.
    fn episode_return_bounds(&self) -> (f64, f64);

    fn agent_group(&self, agent: AgentId) -> AgentGroup;

    fn render(&self) -> String {
        String::new()
    }
}

/// Validates a joint environmental action against the environment's spaces.
pub(crate) fn check_env_actions(actions: &[EnvAction], n_agents: usize, n_actions: usize) -> Result<()> {
    if actions.len() != n_agents {
        return Err(Error::DimensionMismatch {
            expected: n_agents,
            actual: actions.len(),
        });
    }
    for (agent, a) in actions.iter().enumerate() {
        if a.0 >= n_actions {
            return Err(Error::InvalidAction {
                agent,
                action: a.0,
                size: n_actions,
            });
        }
    }
    Ok(())
}

/// SplitMix64 finalizer, used to spread run seeds over the seed space.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_id` under `master_seed`.
pub fn derive_run_seed(master_seed: u64, run_id: usize) -> u64 {
    mix_seed(master_seed ^ mix_seed(run_id as u64))
}

/// Random stream `stream` of a run. Stream 0 drives the environment,
/// stream `i + 1` drives agent `i`, so changing the agent count leaves the
/// other streams untouched.
pub fn stream_rng(seed: u64, stream: u64) -> SmgRng {
    let mut rng = SmgRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn agent_rng(seed: u64, agent: AgentId) -> SmgRng {
    stream_rng(seed, agent.0 as u64 + 1)
}

pub fn env_rng(seed: u64) -> SmgRng {
    stream_rng(seed, 0)
}

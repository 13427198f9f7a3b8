//! Environments and the market wrapper that turns a stochastic game into a
//! stochastic market game.

mod grid;
pub mod matrix;
mod refinery;
mod smartfactory;

pub use grid::{Cell, GridAction, GridConfig};
pub use matrix::{ConflictParams, MatrixGame, Move, Payoff2x2, PdPayoffs};
pub use refinery::{AgentKind, Refinery, RefineryConfig, Resource, ResourceState};
pub use smartfactory::{Machine, Priority, Smartfactory, SmartfactoryConfig, Task};

use crate::error::{Error, Result};
use crate::game::{AgentGroup, AgentId, EnvAction, Environment, Observation, RewardVector, SmgRng, StepOutcome};
use crate::market::{
    ActionSpace, BalanceSheet, DecodedAction, Market, MarketActionIndex, MarketConfig, TradeMatrix,
};

impl Environment for Box<dyn Environment> {
    fn n_agents(&self) -> usize {
        (**self).n_agents()
    }
    fn n_env_actions(&self) -> usize {
        (**self).n_env_actions()
    }
    fn reset(&mut self, rng: &mut SmgRng) {
        (**self).reset(rng)
    }
    fn step(&mut self, actions: &[EnvAction], rng: &mut SmgRng) -> Result<StepOutcome> {
        (**self).step(actions, rng)
    }
    fn observe(&self, agent: AgentId, balance: &BalanceSheet) -> Observation {
        (**self).observe(agent, balance)
    }
    fn observation_len(&self) -> usize {
        (**self).observation_len()
    }
    fn episode_return_bounds(&self) -> (f64, f64) {
        (**self).episode_return_bounds()
    }
    fn agent_group(&self, agent: AgentId) -> AgentGroup {
        (**self).agent_group(agent)
    }
    fn render(&self) -> String {
        (**self).render()
    }
}

/// Result of one environment step followed by one market step.
#[derive(Debug, Clone)]
pub struct MarketOutcome {
    pub joint: Vec<DecodedAction>,
    /// Rewards as produced by the environment.
    pub raw: RewardVector,
    /// Rewards after redistribution; these are what learners see.
    pub rewards: RewardVector,
    pub trades: TradeMatrix,
    pub done: bool,
}

/// An environment together with its market.
pub struct MarketEnv<E> {
    env: E,
    market: Market,
}

impl<E: Environment> MarketEnv<E> {
    pub fn new(env: E, config: MarketConfig) -> Self {
        let market = Market::new(config, env.n_agents(), env.n_env_actions());
        Self { env, market }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn space(&self) -> &ActionSpace {
        self.market.space()
    }

    pub fn n_agents(&self) -> usize {
        self.env.n_agents()
    }

    /// Starts an episode: resets the environment, balance sheet and shares.
    pub fn reset(&mut self, rng: &mut SmgRng) {
        self.env.reset(rng);
        self.market.reset();
    }

    pub fn observe(&self, agent: AgentId) -> Observation {
        self.env.observe(agent, self.market.balance())
    }

    pub fn step(&mut self, joint: Vec<DecodedAction>, rng: &mut SmgRng) -> Result<MarketOutcome> {
        let env_actions: Vec<EnvAction> = joint.iter().map(|a| a.env).collect();
        let out = self.env.step(&env_actions, rng)?;
        let mut rewards = out.rewards.clone();
        let trades = self.market.step(&joint, &mut rewards)?;
        Ok(MarketOutcome {
            joint,
            raw: out.rewards,
            rewards,
            trades,
            done: out.done,
        })
    }

    /// Steps with indices into the market-extended action space.
    pub fn step_indices(&mut self, indices: &[MarketActionIndex], rng: &mut SmgRng) -> Result<MarketOutcome> {
        let n = self.n_agents();
        if indices.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: indices.len(),
            });
        }
        let joint = indices
            .iter()
            .enumerate()
            .map(|(i, &k)| self.space().decode(AgentId(i), k))
            .collect::<Result<Vec<_>>>()?;
        self.step(joint, rng)
    }
}

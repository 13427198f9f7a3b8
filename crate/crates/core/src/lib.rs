//! Stochastic market games: environments whose per-step rewards are
//! redistributed by an action market or a shareholder market, played by
//! independent reinforcement learners.

pub mod env;
pub mod error;
pub mod game;
pub mod harness;
pub mod learners;
pub mod market;

pub use error::{Error, Result};
pub use game::{AgentGroup, AgentId, DiscountFactor, EnvAction, Environment, Observation, SmgRng, StepOutcome};
pub use market::{MarketConfig, MarketKind};

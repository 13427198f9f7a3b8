//! Market function of a stochastic market game.
//!
//! Each market step registers the agents' sell and buy offers, matches them
//! into trades, books prices and dividends, and settles the balance sheet.
//! Every transfer moves reward between agents, so the summed reward of a
//! step is unchanged by the market.

mod ledger;
mod matrix;
mod space;
mod trade;

use serde::{Deserialize, Serialize};

pub use ledger::{settle_balances, BalanceSheet, ShareRegistry};
pub use matrix::SquareMatrix;
pub use space::{
    action_market_space_size, decode_action_market, decode_shareholder, encode_action_market,
    encode_shareholder, shareholder_space_size, ActionSpace, DecodedAction, MarketAction,
    MarketActionIndex, ShareOp,
};
pub use trade::{apply_trades, compute_trades, register_offers, OfferMatrices, TradeMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarketKind {
    None,
    /// Conditional market: trades trigger on executed environmental actions.
    ActionMarket,
    /// Unconditional market: trades create shares paying a fixed dividend.
    ShareholderMarket,
}

impl MarketKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarketKind::None => "none",
            MarketKind::ActionMarket => "action",
            MarketKind::ShareholderMarket => "shareholder",
        }
    }
}

impl std::str::FromStr for MarketKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "no" | "off" => Ok(MarketKind::None),
            "action" | "am" | "action-market" => Ok(MarketKind::ActionMarket),
            "shareholder" | "sm" | "shareholder-market" => Ok(MarketKind::ShareholderMarket),
            other => Err(Error::Config(format!("unknown market kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub kind: MarketKind,
    /// Signed price per trade. Positive: buyer pays seller.
    pub price: f64,
    /// Per-step dividend a share holder draws from the issuer.
    pub dividend: f64,
    pub allow_debt: bool,
}

impl MarketConfig {
    pub fn none() -> Self {
        Self {
            kind: MarketKind::None,
            price: 0.0,
            dividend: 0.0,
            allow_debt: false,
        }
    }

    pub fn action(price: f64) -> Self {
        Self {
            kind: MarketKind::ActionMarket,
            price,
            ..Self::none()
        }
    }

    pub fn shareholder(price: f64, dividend: f64) -> Self {
        Self {
            kind: MarketKind::ShareholderMarket,
            price,
            dividend,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.price.is_finite() {
            return Err(Error::Config("market price must be finite".into()));
        }
        if !self.dividend.is_finite() || self.dividend < 0.0 {
            return Err(Error::Config("market dividend must be finite and >= 0".into()));
        }
        Ok(())
    }
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// Redistributes `rewards` in place for one step and returns the trades made.
pub fn market_step(
    balance: &mut BalanceSheet,
    shares: &mut ShareRegistry,
    joint: &[DecodedAction],
    rewards: &mut [f64],
    config: &MarketConfig,
) -> Result<TradeMatrix> {
    let n = joint.len();
    if rewards.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rewards.len(),
        });
    }
    if config.kind == MarketKind::None {
        return Ok(TradeMatrix::empty(n));
    }
    let offers = register_offers(config.kind, joint);
    let trades = compute_trades(&offers, n);
    apply_trades(&trades, rewards, balance, shares, config)?;
    Ok(trades)
}

/// Per-episode market state: the balance sheet and share registry that
/// accompany the environment state.
#[derive(Debug, Clone)]
pub struct Market {
    config: MarketConfig,
    space: ActionSpace,
    balance: BalanceSheet,
    shares: ShareRegistry,
}

impl Market {
    pub fn new(config: MarketConfig, n_agents: usize, n_env_actions: usize) -> Self {
        Self {
            config,
            space: ActionSpace::new(config.kind, n_agents, n_env_actions),
            balance: BalanceSheet::new(n_agents),
            shares: ShareRegistry::new(n_agents),
        }
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn balance(&self) -> &BalanceSheet {
        &self.balance
    }

    pub fn shares(&self) -> &ShareRegistry {
        &self.shares
    }

    pub fn reset(&mut self) {
        self.balance.clear();
        self.shares.clear();
    }

    pub fn step(&mut self, joint: &[DecodedAction], rewards: &mut [f64]) -> Result<TradeMatrix> {
        market_step(&mut self.balance, &mut self.shares, joint, rewards, &self.config)
    }
}

use super::ledger::{settle_balances, BalanceSheet, ShareRegistry};
use super::matrix::SquareMatrix;
use super::space::{DecodedAction, MarketAction, ShareOp};
use super::{MarketConfig, MarketKind};
use crate::error::{Error, Result};
use crate::game::EnvAction;

/// Sell matrix `S` and buy matrix `B` for one market step.
///
/// Action market: `S(i, j)` is the environmental action `i` executes (its
/// standing sell offer to every `j`), `B(i, j)` the action `i` is willing to
/// buy from `j`. Shareholder market: both matrices are binary.
#[derive(Debug, Clone, PartialEq)]
pub enum OfferMatrices {
    None,
    Action {
        sell: SquareMatrix<Option<EnvAction>>,
        buy: SquareMatrix<Option<EnvAction>>,
    },
    Shareholder {
        sell: SquareMatrix<bool>,
        buy: SquareMatrix<bool>,
    },
}

/// `T(i, j)` set means a trade with seller `i` and buyer `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeMatrix(SquareMatrix<bool>);

impl TradeMatrix {
    pub fn empty(n_agents: usize) -> Self {
        Self(SquareMatrix::new(n_agents))
    }

    pub fn from_pairs(n_agents: usize, pairs: &[(usize, usize)]) -> Self {
        let mut t = Self::empty(n_agents);
        for &(seller, buyer) in pairs {
            if seller != buyer {
                t.0.set(seller, buyer, true);
            }
        }
        t
    }

    pub fn n_agents(&self) -> usize {
        self.0.dim()
    }

    pub fn is_trade(&self, seller: usize, buyer: usize) -> bool {
        *self.0.get(seller, buyer)
    }

    pub fn count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&t| t).count()
    }

    /// Number of trades `agent` takes part in, on either side.
    pub fn involving(&self, agent: usize) -> usize {
        let n = self.n_agents();
        (0..n)
            .filter(|&k| self.is_trade(agent, k) || self.is_trade(k, agent))
            .count()
    }

    /// `(seller, buyer)` pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_agents();
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_trade(i, j))
    }
}

pub fn register_offers(kind: MarketKind, actions: &[DecodedAction]) -> OfferMatrices {
    let n = actions.len();
    match kind {
        MarketKind::None => OfferMatrices::None,
        MarketKind::ActionMarket => {
            let mut sell = SquareMatrix::new(n);
            let mut buy = SquareMatrix::new(n);
            for (i, a) in actions.iter().enumerate() {
                for j in (0..n).filter(|&j| j != i) {
                    sell.set(i, j, Some(a.env));
                }
                if let MarketAction::Offer { target, action } = a.market {
                    if target.0 != i && target.0 < n {
                        buy.set(i, target.0, Some(action));
                    }
                }
            }
            OfferMatrices::Action { sell, buy }
        }
        MarketKind::ShareholderMarket => {
            let mut sell = SquareMatrix::new(n);
            let mut buy = SquareMatrix::new(n);
            for (i, a) in actions.iter().enumerate() {
                match a.market {
                    MarketAction::Share { op: ShareOp::Sell, .. } => {
                        for j in (0..n).filter(|&j| j != i) {
                            sell.set(i, j, true);
                        }
                    }
                    MarketAction::Share { op: ShareOp::Buy, target } if target.0 != i && target.0 < n => {
                        buy.set(i, target.0, true);
                    }
                    _ => {}
                }
            }
            OfferMatrices::Shareholder { sell, buy }
        }
    }
}

/// Matches sell offers of `i` against buy offers of `j` aimed at `i`.
pub fn compute_trades(offers: &OfferMatrices, n_agents: usize) -> TradeMatrix {
    let mut trades = TradeMatrix::empty(n_agents);
    match offers {
        OfferMatrices::None => {}
        OfferMatrices::Action { sell, buy } => {
            for i in 0..n_agents {
                for j in (0..n_agents).filter(|&j| j != i) {
                    if let (Some(executed), Some(wanted)) = (sell.get(i, j), buy.get(j, i)) {
                        if executed == wanted {
                            trades.0.set(i, j, true);
                        }
                    }
                }
            }
        }
        OfferMatrices::Shareholder { sell, buy } => {
            for i in 0..n_agents {
                for j in (0..n_agents).filter(|&j| j != i) {
                    if *sell.get(i, j) && *buy.get(j, i) {
                        trades.0.set(i, j, true);
                    }
                }
            }
        }
    }
    trades
}

/// Books the price of a trade: positive prices flow from buyer to seller,
/// negative prices from seller to buyer.
fn book_price(balance: &mut BalanceSheet, seller: usize, buyer: usize, price: f64) {
    if price > 0.0 {
        balance.add_liability(buyer, seller, price);
    } else if price < 0.0 {
        balance.add_liability(seller, buyer, -price);
    }
}

/// Applies trades, pays dividends and settles the balance sheet in place.
///
/// Dividends are drawn from each issuer's positive reward as it stood when
/// the step's rewards came in; holders of one issuer are paid in ascending
/// index order until that reward is exhausted.
pub fn apply_trades(
    trades: &TradeMatrix,
    rewards: &mut [f64],
    balance: &mut BalanceSheet,
    shares: &mut ShareRegistry,
    config: &MarketConfig,
) -> Result<()> {
    let n = trades.n_agents();
    for (what, len) in [
        (rewards.len(), n),
        (balance.n_agents(), n),
        (shares.n_agents(), n),
    ] {
        if what != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: what,
            });
        }
    }
    match config.kind {
        MarketKind::None => return Ok(()),
        MarketKind::ActionMarket => {
            for (seller, buyer) in trades.pairs() {
                book_price(balance, seller, buyer, config.price);
            }
        }
        MarketKind::ShareholderMarket => {
            for (seller, buyer) in trades.pairs() {
                if shares.grant(buyer, seller) {
                    book_price(balance, seller, buyer, config.price);
                }
            }
            if config.dividend > 0.0 {
                let budgets: Vec<f64> = rewards.iter().map(|&r| r.max(0.0)).collect();
                for issuer in 0..n {
                    let mut budget = budgets[issuer];
                    for holder in 0..n {
                        if budget <= 0.0 {
                            break;
                        }
                        if shares.holds(holder, issuer) {
                            let paid = config.dividend.min(budget);
                            budget -= paid;
                            rewards[issuer] -= paid;
                            rewards[holder] += paid;
                        }
                    }
                }
            }
        }
    }
    settle_balances(rewards, balance, config.allow_debt)
}

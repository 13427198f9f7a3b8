//! Market-extended action spaces.
//!
//! Action market: the first `|A^e|` indices are plain environmental actions.
//! The remaining `(N-1)|A^e|^2` indices enumerate
//! `(env_action, target != self, offered_action)` lexicographically, so for
//! two agents and `{C, D}` the order is
//! `(C,-) (D,-) (C,C) (C,D) (D,C) (D,D)`.
//!
//! Shareholder market: `|A^e| * 2 * N` indices enumerate
//! `(env_action, op, target)` lexicographically with `Buy` before `Sell`.
//! A buy aimed at oneself is the market no-op; a sell is broadcast to every
//! other agent whatever its nominal target.

use serde::{Deserialize, Serialize};

use super::MarketKind;
use crate::error::{Error, Result};
use crate::game::{AgentId, EnvAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarketActionIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShareOp {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarketAction {
    NoOp,
    /// Buy `action` from `target`: a trade happens if `target` executes it.
    Offer { target: AgentId, action: EnvAction },
    Share { op: ShareOp, target: AgentId },
}

/// One agent's environmental action together with its market action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedAction {
    pub env: EnvAction,
    pub market: MarketAction,
}

impl DecodedAction {
    pub fn plain(env: usize) -> Self {
        Self {
            env: EnvAction(env),
            market: MarketAction::NoOp,
        }
    }

    pub fn offer(env: usize, target: usize, action: usize) -> Self {
        Self {
            env: EnvAction(env),
            market: MarketAction::Offer {
                target: AgentId(target),
                action: EnvAction(action),
            },
        }
    }

    pub fn share(env: usize, op: ShareOp, target: usize) -> Self {
        Self {
            env: EnvAction(env),
            market: MarketAction::Share {
                op,
                target: AgentId(target),
            },
        }
    }
}

/// `|A^e| + (N-1) |A^e|^2`.
pub fn action_market_space_size(n_agents: usize, n_env_actions: usize) -> usize {
    n_env_actions + n_agents.saturating_sub(1) * n_env_actions * n_env_actions
}

/// `|A^e| * 2 * N`.
pub fn shareholder_space_size(n_agents: usize, n_env_actions: usize) -> usize {
    n_env_actions * 2 * n_agents
}

pub fn decode_action_market(
    index: MarketActionIndex,
    agent: AgentId,
    n_agents: usize,
    n_env_actions: usize,
) -> Result<DecodedAction> {
    let size = action_market_space_size(n_agents, n_env_actions);
    if index.0 >= size {
        return Err(Error::MarketIndexOutOfRange {
            index: index.0,
            size,
        });
    }
    if index.0 < n_env_actions {
        return Ok(DecodedAction::plain(index.0));
    }
    let k = index.0 - n_env_actions;
    let per_env = (n_agents - 1) * n_env_actions;
    let env = k / per_env;
    let rem = k % per_env;
    let slot = rem / n_env_actions;
    let offered = rem % n_env_actions;
    let target = if slot < agent.0 { slot } else { slot + 1 };
    Ok(DecodedAction::offer(env, target, offered))
}

pub fn encode_action_market(
    action: &DecodedAction,
    agent: AgentId,
    n_agents: usize,
    n_env_actions: usize,
) -> Result<MarketActionIndex> {
    let size = action_market_space_size(n_agents, n_env_actions);
    let env = action.env.0;
    if env >= n_env_actions {
        return Err(Error::InvalidAction {
            agent: agent.0,
            action: env,
            size: n_env_actions,
        });
    }
    match action.market {
        MarketAction::NoOp => Ok(MarketActionIndex(env)),
        MarketAction::Offer { target, action: offered } => {
            if target == agent || target.0 >= n_agents || offered.0 >= n_env_actions {
                return Err(Error::MarketIndexOutOfRange { index: usize::MAX, size });
            }
            let slot = if target.0 < agent.0 { target.0 } else { target.0 - 1 };
            let per_env = (n_agents - 1) * n_env_actions;
            Ok(MarketActionIndex(
                n_env_actions + env * per_env + slot * n_env_actions + offered.0,
            ))
        }
        MarketAction::Share { .. } => Err(Error::MarketIndexOutOfRange { index: usize::MAX, size }),
    }
}

pub fn decode_shareholder(
    index: MarketActionIndex,
    n_agents: usize,
    n_env_actions: usize,
) -> Result<DecodedAction> {
    let size = shareholder_space_size(n_agents, n_env_actions);
    if index.0 >= size {
        return Err(Error::MarketIndexOutOfRange {
            index: index.0,
            size,
        });
    }
    let target = index.0 % n_agents;
    let rest = index.0 / n_agents;
    let op = if rest.is_multiple_of(2) { ShareOp::Buy } else { ShareOp::Sell };
    Ok(DecodedAction::share(rest / 2, op, target))
}

pub fn encode_shareholder(
    action: &DecodedAction,
    n_agents: usize,
    n_env_actions: usize,
) -> Result<MarketActionIndex> {
    let size = shareholder_space_size(n_agents, n_env_actions);
    match action.market {
        MarketAction::Share { op, target } if target.0 < n_agents && action.env.0 < n_env_actions => {
            let op = match op {
                ShareOp::Buy => 0,
                ShareOp::Sell => 1,
            };
            Ok(MarketActionIndex((action.env.0 * 2 + op) * n_agents + target.0))
        }
        _ => Err(Error::MarketIndexOutOfRange { index: usize::MAX, size }),
    }
}

/// The full action space an agent's policy chooses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub kind: MarketKind,
    pub n_agents: usize,
    pub n_env_actions: usize,
}

impl ActionSpace {
    pub fn new(kind: MarketKind, n_agents: usize, n_env_actions: usize) -> Self {
        Self {
            kind,
            n_agents,
            n_env_actions,
        }
    }

    pub fn size(&self) -> usize {
        match self.kind {
            MarketKind::None => self.n_env_actions,
            MarketKind::ActionMarket => action_market_space_size(self.n_agents, self.n_env_actions),
            MarketKind::ShareholderMarket => shareholder_space_size(self.n_agents, self.n_env_actions),
        }
    }

    pub fn decode(&self, agent: AgentId, index: MarketActionIndex) -> Result<DecodedAction> {
        match self.kind {
            MarketKind::None => {
                if index.0 < self.n_env_actions {
                    Ok(DecodedAction::plain(index.0))
                } else {
                    Err(Error::MarketIndexOutOfRange {
                        index: index.0,
                        size: self.n_env_actions,
                    })
                }
            }
            MarketKind::ActionMarket => {
                decode_action_market(index, agent, self.n_agents, self.n_env_actions)
            }
            MarketKind::ShareholderMarket => {
                decode_shareholder(index, self.n_agents, self.n_env_actions)
            }
        }
    }

    pub fn encode(&self, agent: AgentId, action: &DecodedAction) -> Result<MarketActionIndex> {
        match self.kind {
            MarketKind::None => match action.market {
                MarketAction::NoOp if action.env.0 < self.n_env_actions => {
                    Ok(MarketActionIndex(action.env.0))
                }
                _ => Err(Error::MarketIndexOutOfRange {
                    index: usize::MAX,
                    size: self.n_env_actions,
                }),
            },
            MarketKind::ActionMarket => {
                encode_action_market(action, agent, self.n_agents, self.n_env_actions)
            }
            MarketKind::ShareholderMarket => {
                encode_shareholder(action, self.n_agents, self.n_env_actions)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_sizes() {
        assert_eq!(action_market_space_size(2, 2), 6);
        assert_eq!(action_market_space_size(16, 2), 62);
        assert_eq!(action_market_space_size(2, 1), 2);
        assert_eq!(shareholder_space_size(2, 2), 8);
        assert_eq!(shareholder_space_size(4, 5), 40);
        assert_eq!(shareholder_space_size(1, 1), 2);
    }

    #[test]
    fn two_player_action_market_order() {
        let decoded: Vec<_> = (0..6)
            .map(|k| decode_action_market(MarketActionIndex(k), AgentId(0), 2, 2).unwrap())
            .collect();
        assert_eq!(decoded[0], DecodedAction::plain(0));
        assert_eq!(decoded[1], DecodedAction::plain(1));
        assert_eq!(decoded[2], DecodedAction::offer(0, 1, 0));
        assert_eq!(decoded[3], DecodedAction::offer(0, 1, 1));
        assert_eq!(decoded[4], DecodedAction::offer(1, 1, 0));
        assert_eq!(decoded[5], DecodedAction::offer(1, 1, 1));
        // agent 1 targets agent 0
        assert_eq!(
            decode_action_market(MarketActionIndex(2), AgentId(1), 2, 2).unwrap(),
            DecodedAction::offer(0, 0, 0)
        );
        assert!(decode_action_market(MarketActionIndex(6), AgentId(0), 2, 2).is_err());
    }

    #[test]
    fn shareholder_layout() {
        let d = decode_shareholder(MarketActionIndex(0), 2, 2).unwrap();
        assert_eq!(d, DecodedAction::share(0, ShareOp::Buy, 0));
        let d = decode_shareholder(MarketActionIndex(3), 2, 2).unwrap();
        assert_eq!(d, DecodedAction::share(0, ShareOp::Sell, 1));
        let d = decode_shareholder(MarketActionIndex(7), 2, 2).unwrap();
        assert_eq!(d, DecodedAction::share(1, ShareOp::Sell, 1));
        assert!(decode_shareholder(MarketActionIndex(8), 2, 2).is_err());
    }

    #[test]
    fn bijection_exhaustive() {
        for n in 1..=4 {
            for a in 1..=6 {
                for kind in [MarketKind::None, MarketKind::ActionMarket, MarketKind::ShareholderMarket] {
                    if kind == MarketKind::ActionMarket && n < 2 {
                        continue;
                    }
                    let space = ActionSpace::new(kind, n, a);
                    for agent in 0..n {
                        let mut seen = std::collections::HashSet::new();
                        for k in 0..space.size() {
                            let d = space.decode(AgentId(agent), MarketActionIndex(k)).unwrap();
                            assert!(seen.insert(d), "duplicate decode");
                            assert_eq!(space.encode(AgentId(agent), &d).unwrap(), MarketActionIndex(k));
                        }
                    }
                }
            }
        }
    }
}

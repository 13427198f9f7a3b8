//! Two-player matrix games: the Conflict game with tunable conflict and the
//! Prisoner's Dilemma.
//!
//! Each call to `step` plays one one-shot round; a round is a complete
//! episode, so the harness runs a matrix experiment as a budget of rounds.

use serde::{Deserialize, Serialize};

use super::MarketEnv;
use crate::error::{Error, Result};
use crate::game::{
    check_env_actions, AgentGroup, AgentId, EnvAction, Environment, Observation, SmgRng,
    StepOutcome,
};
use crate::market::{BalanceSheet, MarketConfig, MarketKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    C,
    D,
}

impl Move {
    pub fn index(self) -> usize {
        match self {
            Move::C => 0,
            Move::D => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Move> {
        match i {
            0 => Some(Move::C),
            1 => Some(Move::D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictParams {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
}

impl ConflictParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

impl Default for ConflictParams {
    fn default() -> Self {
        Self {
            r1: 0.375,
            r2: 2.625,
            alpha: 0.0,
        }
    }
}

/// Coordinated outcomes pay `(R1, R2 - alpha)`, uncoordinated ones `(0, alpha)`.
pub fn conflict_payoff(a1: Move, a2: Move, params: &ConflictParams) -> (f64, f64) {
    if a1 == a2 {
        (params.r1, params.r2 - params.alpha)
    } else {
        (0.0, params.alpha)
    }
}

/// Largest total payoff over joint actions: `max(R1 + R2 - alpha, alpha)`.
pub fn pareto_frontier(params: &ConflictParams) -> f64 {
    (params.r1 + params.r2 - params.alpha).max(params.alpha)
}

/// Prisoner's Dilemma payoffs `T > R > P > S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdPayoffs {
    pub temptation: f64,
    pub reward: f64,
    pub punishment: f64,
    pub sucker: f64,
}

impl PdPayoffs {
    /// The textbook `(5, 3, 1, 0)` values.
    pub fn canonical() -> Self {
        Self {
            temptation: 5.0,
            reward: 3.0,
            punishment: 1.0,
            sucker: 0.0,
        }
    }
}

impl Default for PdPayoffs {
    /// `(2, 1, 0, -1)`: mutual cooperation pays less than a price of 1.9,
    /// defection against a cooperator pays more.
    fn default() -> Self {
        Self {
            temptation: 2.0,
            reward: 1.0,
            punishment: 0.0,
            sucker: -1.0,
        }
    }
}

pub fn pd_payoff(a1: Move, a2: Move, p: &PdPayoffs) -> (f64, f64) {
    match (a1, a2) {
        (Move::C, Move::C) => (p.reward, p.reward),
        (Move::D, Move::D) => (p.punishment, p.punishment),
        (Move::C, Move::D) => (p.sucker, p.temptation),
        (Move::D, Move::C) => (p.temptation, p.sucker),
    }
}

/// 2x2 bimatrix indexed by (first player's move, second player's move).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payoff2x2 {
    pub cells: [[(f64, f64); 2]; 2],
}

impl Payoff2x2 {
    fn from_fn(f: impl Fn(Move, Move) -> (f64, f64)) -> Self {
        let mut cells = [[(0.0, 0.0); 2]; 2];
        for a in [Move::C, Move::D] {
            for b in [Move::C, Move::D] {
                cells[a.index()][b.index()] = f(a, b);
            }
        }
        Self { cells }
    }

    pub fn conflict(params: &ConflictParams) -> Self {
        Self::from_fn(|a, b| conflict_payoff(a, b, params))
    }

    pub fn prisoners_dilemma(payoffs: &PdPayoffs) -> Self {
        Self::from_fn(|a, b| pd_payoff(a, b, payoffs))
    }

    pub fn get(&self, a1: Move, a2: Move) -> (f64, f64) {
        self.cells[a1.index()][a2.index()]
    }

    fn totals(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().flatten().map(|(x, y)| x + y)
    }

    pub fn min_total(&self) -> f64 {
        self.totals().fold(f64::INFINITY, f64::min)
    }

    pub fn max_total(&self) -> f64 {
        self.totals().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pure-strategy Nash equilibria by best-response enumeration.
    pub fn pure_nash_equilibria(&self) -> Vec<(Move, Move)> {
        let moves = [Move::C, Move::D];
        let mut out = Vec::new();
        for a in moves {
            for b in moves {
                let (u1, u2) = self.get(a, b);
                let row_best = moves.iter().all(|&x| self.get(x, b).0 <= u1);
                let col_best = moves.iter().all(|&y| self.get(a, y).1 <= u2);
                if row_best && col_best {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MatrixGame {
    payoff: Payoff2x2,
    /// Expose the previous round's joint action in observations.
    memory: bool,
    last: Option<(usize, usize)>,
    done: bool,
}

impl MatrixGame {
    pub fn new(payoff: Payoff2x2) -> Self {
        Self {
            payoff,
            memory: false,
            last: None,
            done: false,
        }
    }

    pub fn with_memory(mut self, memory: bool) -> Self {
        self.memory = memory;
        self
    }

    pub fn payoff(&self) -> &Payoff2x2 {
        &self.payoff
    }
}

impl Environment for MatrixGame {
    fn n_agents(&self) -> usize {
        2
    }

    fn n_env_actions(&self) -> usize {
        2
    }

    /// Starts a new round. The previous joint action survives a reset so
    /// memory observations carry across rounds.
    fn reset(&mut self, _rng: &mut SmgRng) {
        self.done = false;
    }

    fn step(&mut self, actions: &[EnvAction], _rng: &mut SmgRng) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        check_env_actions(actions, 2, 2)?;
        let (a, b) = (actions[0].0, actions[1].0);
        let (r1, r2) = self.payoff.cells[a][b];
        self.last = Some((a, b));
        self.done = true;
        Ok(StepOutcome {
            rewards: vec![r1, r2],
            done: true,
        })
    }

    fn observe(&self, agent: AgentId, _balance: &BalanceSheet) -> Observation {
        if !self.memory {
            return Observation {
                key: 0,
                features: vec![1.0],
            };
        }
        let mut features = vec![0.0; 5];
        features[0] = 1.0;
        let key = match self.last {
            None => 0,
            Some((a, b)) => {
                // own move first
                let (own, other) = if agent.0 == 0 { (a, b) } else { (b, a) };
                features[1 + own * 2 + other] = 1.0;
                1 + (own * 2 + other) as u64
            }
        };
        Observation { key, features }
    }

    fn observation_len(&self) -> usize {
        if self.memory {
            5
        } else {
            1
        }
    }

    fn episode_return_bounds(&self) -> (f64, f64) {
        (self.payoff.min_total(), self.payoff.max_total())
    }

    fn agent_group(&self, agent: AgentId) -> AgentGroup {
        AgentGroup::Player(agent.0)
    }

    fn render(&self) -> String {
        match self.last {
            None => "--".into(),
            Some((a, b)) => {
                let c = |m| if m == 0 { 'C' } else { 'D' };
                format!("{}{}", c(a), c(b))
            }
        }
    }
}

/// The matrix game played over the action-market-extended action space.
pub fn market_extended_matrix_env(base: Payoff2x2, config: MarketConfig) -> Result<MarketEnv<MatrixGame>> {
    if config.kind != MarketKind::ActionMarket {
        return Err(Error::UnsupportedMarket(config.kind));
    }
    config.validate()?;
    Ok(MarketEnv::new(MatrixGame::new(base), config))
}

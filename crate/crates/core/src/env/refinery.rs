//! Refinery: refiners and consumers compete for a common resource.
//!
//! A refiner standing on a raw unit may consume it (`Interact`, small
//! reward) or refine it (`Refine`, no reward). Only consumers can consume
//! refined units, for a large reward. Every agent has the same 7 actions;
//! `Refine` is inert for consumers.

use serde::{Deserialize, Serialize};

use super::grid::{Canvas, Cell, GridAction, GridConfig};
use crate::error::{Error, Result};
use crate::game::{
    check_env_actions, AgentGroup, AgentId, EnvAction, Environment, Observation, SmgRng,
    StepOutcome,
};
use crate::market::BalanceSheet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineryConfig {
    pub grid: GridConfig,
    pub initial_raw: usize,
    pub initial_refined: usize,
    pub r_high: f64,
    pub r_low: f64,
}

impl Default for RefineryConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            initial_raw: 5,
            initial_refined: 3,
            r_high: 5.0,
            r_low: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Refiner,
    Consumer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceState {
    Raw,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub position: Cell,
    pub state: ResourceState,
    pub consumed: bool,
}

#[derive(Debug, Clone)]
pub struct Refinery {
    config: RefineryConfig,
    positions: Vec<Cell>,
    resources: Vec<Resource>,
    step: usize,
    finished: bool,
}

impl Refinery {
    pub fn new(config: RefineryConfig) -> Result<Self> {
        let needed = config.grid.n_agents + config.initial_raw + config.initial_refined;
        if needed > config.grid.n_cells() {
            return Err(Error::GridTooSmall {
                width: config.grid.width,
                height: config.grid.height,
                needed,
            });
        }
        if config.grid.n_agents == 0 {
            return Err(Error::Config("refinery needs at least one agent".into()));
        }
        Ok(Self {
            config,
            positions: Vec::new(),
            resources: Vec::new(),
            step: 0,
            finished: true,
        })
    }

    pub fn config(&self) -> &RefineryConfig {
        &self.config
    }

    /// The first half of the agents (rounded up) are refiners.
    pub fn kind(&self, agent: AgentId) -> AgentKind {
        if agent.0 < self.config.grid.n_agents.div_ceil(2) {
            AgentKind::Refiner
        } else {
            AgentKind::Consumer
        }
    }

    pub fn position(&self, agent: AgentId) -> Cell {
        self.positions[agent.0]
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// `(raw, refined, consumed)` counts.
    pub fn resource_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for r in &self.resources {
            match (r.consumed, r.state) {
                (true, _) => counts.2 += 1,
                (false, ResourceState::Raw) => counts.0 += 1,
                (false, ResourceState::Refined) => counts.1 += 1,
            }
        }
        counts
    }

    pub fn reset_with(&mut self, positions: Vec<Cell>, resources: Vec<(Cell, ResourceState)>) {
        self.positions = positions;
        self.resources = resources
            .into_iter()
            .map(|(position, state)| Resource {
                position,
                state,
                consumed: false,
            })
            .collect();
        self.step = 0;
        self.finished = false;
    }

    fn resource_at(&mut self, c: Cell) -> Option<&mut Resource> {
        self.resources.iter_mut().find(|r| !r.consumed && r.position == c)
    }
}

impl Environment for Refinery {
    fn n_agents(&self) -> usize {
        self.config.grid.n_agents
    }

    fn n_env_actions(&self) -> usize {
        7
    }

    fn reset(&mut self, rng: &mut SmgRng) {
        let n = self.config.grid.n_agents;
        let n_res = self.config.initial_raw + self.config.initial_refined;
        let cells = self
            .config
            .grid
            .distinct_cells(n + n_res, rng)
            .expect("grid size checked at construction");
        self.positions = cells[..n].to_vec();
        self.resources = (0..n_res)
            .map(|k| Resource {
                position: cells[n + k],
                state: if k < self.config.initial_raw {
                    ResourceState::Raw
                } else {
                    ResourceState::Refined
                },
                consumed: false,
            })
            .collect();
        self.step = 0;
        self.finished = false;
    }

    fn step(&mut self, actions: &[EnvAction], _rng: &mut SmgRng) -> Result<StepOutcome> {
        if self.finished {
            return Err(Error::EpisodeDone);
        }
        let n = self.n_agents();
        check_env_actions(actions, n, self.n_env_actions())?;
        let mut rewards = vec![0.0; n];
        for (i, a) in actions.iter().enumerate() {
            let action = GridAction::from_index(a.0).unwrap_or(GridAction::Stay);
            let kind = self.kind(AgentId(i));
            let pos = self.config.grid.apply_move(self.positions[i], action);
            self.positions[i] = pos;
            let (r_high, r_low) = (self.config.r_high, self.config.r_low);
            let Some(res) = self.resource_at(pos) else {
                continue;
            };
            match (action, kind, res.state) {
                (GridAction::Interact, AgentKind::Refiner, ResourceState::Raw) => {
                    res.consumed = true;
                    rewards[i] = r_low;
                }
                (GridAction::Interact, AgentKind::Consumer, ResourceState::Refined) => {
                    res.consumed = true;
                    rewards[i] = r_high;
                }
                (GridAction::Refine, AgentKind::Refiner, ResourceState::Raw) => {
                    res.state = ResourceState::Refined;
                }
                _ => {}
            }
        }
        self.step += 1;
        let exhausted = self.resources.iter().all(|r| r.consumed);
        self.finished = exhausted || self.step >= self.config.grid.steps_per_episode;
        Ok(StepOutcome {
            rewards,
            done: self.finished,
        })
    }

    fn observe(&self, agent: AgentId, balance: &BalanceSheet) -> Observation {
        let g = &self.config.grid;
        let me = self.positions[agent.0];
        let mut f = Vec::with_capacity(self.observation_len());
        f.push(g.norm_x(me));
        f.push(g.norm_y(me));
        for r in &self.resources {
            f.push(g.rel_x(me, r.position));
            f.push(g.rel_y(me, r.position));
            f.push(if r.state == ResourceState::Refined { 1.0 } else { 0.0 });
            f.push(if r.consumed { 0.0 } else { 1.0 });
        }
        f.push(if self.kind(agent) == AgentKind::Refiner { 1.0 } else { 0.0 });
        let scale = self.config.r_high.max(1e-9);
        f.push(balance.owed_by(agent.0) / scale);
        f.push(balance.owed_to(agent.0) / scale);
        for (j, &p) in self.positions.iter().enumerate() {
            if j != agent.0 {
                f.push(g.rel_x(me, p));
                f.push(g.rel_y(me, p));
            }
        }
        Observation {
            key: g.index_of(me) as u64,
            features: f,
        }
    }

    fn observation_len(&self) -> usize {
        let n_res = self.config.initial_raw + self.config.initial_refined;
        2 + 4 * n_res + 1 + 2 + 2 * (self.config.grid.n_agents - 1)
    }

    /// Every unit refined and consumed at the high reward.
    fn episode_return_bounds(&self) -> (f64, f64) {
        let units = (self.config.initial_raw + self.config.initial_refined) as f64;
        (0.0, units * self.config.r_high.max(self.config.r_low))
    }

    fn agent_group(&self, agent: AgentId) -> AgentGroup {
        match self.kind(agent) {
            AgentKind::Refiner => AgentGroup::Refiner,
            AgentKind::Consumer => AgentGroup::Consumer,
        }
    }

    /// Raw units `r`, refined units `R`, agents as hex digits.
    fn render(&self) -> String {
        let mut canvas = Canvas::new(&self.config.grid);
        for r in self.resources.iter().filter(|r| !r.consumed) {
            canvas.put(
                r.position,
                match r.state {
                    ResourceState::Raw => 'r',
                    ResourceState::Refined => 'R',
                },
            );
        }
        canvas.put_agents(self.positions.iter().copied());
        canvas.finish()
    }
}

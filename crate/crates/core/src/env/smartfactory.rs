//! Smartfactory: agents visit machines in the order given by their task.
//!
//! A machine that has just been used stays inactive for `t_inactive` steps.
//! Rewards are sparse: an agent is paid once, on its final activation, an
//! amount that depends on its task priority.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::grid::{Canvas, Cell, GridAction, GridConfig};
use crate::error::{Error, Result};
use crate::game::{
    check_env_actions, AgentGroup, AgentId, EnvAction, Environment, Observation, SmgRng,
    StepOutcome,
};
use crate::market::BalanceSheet;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmartfactoryConfig {
    pub grid: GridConfig,
    pub machine_types: usize,
    pub machines_per_type: usize,
    pub task_length: usize,
    pub t_inactive: usize,
    pub r_high: f64,
    pub r_low: f64,
}

impl Default for SmartfactoryConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            machine_types: 2,
            machines_per_type: 2,
            task_length: 3,
            t_inactive: 8,
            r_high: 5.0,
            r_low: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Priority {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub machine_type: usize,
    pub position: Cell,
    /// First step index at which the machine can be activated again.
    pub available_from: usize,
}

impl Machine {
    pub fn is_active(&self, step: usize) -> bool {
        step >= self.available_from
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub required: Vec<usize>,
    pub completed: usize,
    pub priority: Priority,
}

impl Task {
    pub fn next_required(&self) -> Option<usize> {
        self.required.get(self.completed).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.completed >= self.required.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FactoryAgent {
    position: Cell,
    task: Task,
}

#[derive(Debug, Clone)]
pub struct Smartfactory {
    config: SmartfactoryConfig,
    agents: Vec<FactoryAgent>,
    machines: Vec<Machine>,
    step: usize,
    finished: bool,
}

impl Smartfactory {
    pub fn new(config: SmartfactoryConfig) -> Result<Self> {
        let needed = config.grid.n_agents + config.machine_types * config.machines_per_type;
        if needed > config.grid.n_cells() {
            return Err(Error::GridTooSmall {
                width: config.grid.width,
                height: config.grid.height,
                needed,
            });
        }
        if config.grid.n_agents == 0 || config.machine_types == 0 || config.task_length == 0 {
            return Err(Error::Config("smartfactory needs agents, machine types and tasks".into()));
        }
        Ok(Self {
            config,
            agents: Vec::new(),
            machines: Vec::new(),
            step: 0,
            finished: true,
        })
    }

    pub fn config(&self) -> &SmartfactoryConfig {
        &self.config
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn position(&self, agent: AgentId) -> Cell {
        self.agents[agent.0].position
    }

    pub fn task(&self, agent: AgentId) -> &Task {
        &self.agents[agent.0].task
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn reward_for(&self, priority: Priority) -> f64 {
        match priority {
            Priority::High => self.config.r_high,
            Priority::Low => self.config.r_low,
        }
    }

    /// Places agents and machines at explicit cells, for scripted scenarios.
    pub fn reset_with(&mut self, agents: Vec<(Cell, Task)>, machines: Vec<(usize, Cell)>) {
        self.agents = agents
            .into_iter()
            .map(|(position, task)| FactoryAgent { position, task })
            .collect();
        self.machines = machines
            .into_iter()
            .map(|(machine_type, position)| Machine {
                machine_type,
                position,
                available_from: 0,
            })
            .collect();
        self.step = 0;
        self.finished = false;
    }
}

impl Environment for Smartfactory {
    fn n_agents(&self) -> usize {
        self.config.grid.n_agents
    }

    fn n_env_actions(&self) -> usize {
        5
    }

    fn reset(&mut self, rng: &mut SmgRng) {
        let n = self.config.grid.n_agents;
        let n_machines = self.config.machine_types * self.config.machines_per_type;
        let cells = self
            .config
            .grid
            .distinct_cells(n + n_machines, rng)
            .expect("grid size checked at construction");
        let n_high = n.div_ceil(2);
        let mut priorities: Vec<Priority> = (0..n)
            .map(|i| if i < n_high { Priority::High } else { Priority::Low })
            .collect();
        priorities.shuffle(rng);
        self.agents = (0..n)
            .map(|i| FactoryAgent {
                position: cells[i],
                task: Task {
                    required: (0..self.config.task_length)
                        .map(|_| rng.random_range(0..self.config.machine_types))
                        .collect(),
                    completed: 0,
                    priority: priorities[i],
                },
            })
            .collect();
        self.machines = (0..n_machines)
            .map(|m| Machine {
                machine_type: m / self.config.machines_per_type,
                position: cells[n + m],
                available_from: 0,
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
        let t = self.step;
        for (i, a) in actions.iter().enumerate() {
            if self.agents[i].task.is_complete() {
                continue;
            }
            let action = GridAction::from_index(a.0).unwrap_or(GridAction::Stay);
            let pos = self.config.grid.apply_move(self.agents[i].position, action);
            self.agents[i].position = pos;
            let Some(wanted) = self.agents[i].task.next_required() else {
                continue;
            };
            if let Some(m) = self
                .machines
                .iter_mut()
                .find(|m| m.position == pos && m.machine_type == wanted && m.is_active(t))
            {
                m.available_from = t + self.config.t_inactive + 1;
                let task = &mut self.agents[i].task;
                task.completed += 1;
                if task.is_complete() {
                    rewards[i] = match task.priority {
                        Priority::High => self.config.r_high,
                        Priority::Low => self.config.r_low,
                    };
                }
            }
        }
        self.step += 1;
        let all_done = self.agents.iter().all(|a| a.task.is_complete());
        self.finished = all_done || self.step >= self.config.grid.steps_per_episode;
        Ok(StepOutcome {
            rewards,
            done: self.finished,
        })
    }

    fn observe(&self, agent: AgentId, balance: &BalanceSheet) -> Observation {
        let g = &self.config.grid;
        let me = &self.agents[agent.0];
        let mut f = Vec::with_capacity(self.observation_len());
        f.push(g.norm_x(me.position));
        f.push(g.norm_y(me.position));
        let type_scale = (self.config.machine_types.max(2) - 1) as f64;
        for m in &self.machines {
            f.push(g.rel_x(me.position, m.position));
            f.push(g.rel_y(me.position, m.position));
            f.push(m.machine_type as f64 / type_scale);
            f.push(if m.is_active(self.step) { 1.0 } else { 0.0 });
        }
        let next = me.task.next_required();
        for k in 0..self.config.machine_types {
            f.push(if next == Some(k) { 1.0 } else { 0.0 });
        }
        f.push(me.task.completed as f64 / self.config.task_length as f64);
        f.push(if me.task.priority == Priority::High { 1.0 } else { 0.0 });
        let scale = self.config.r_high.max(1e-9);
        f.push(balance.owed_by(agent.0) / scale);
        f.push(balance.owed_to(agent.0) / scale);
        for (j, other) in self.agents.iter().enumerate() {
            if j != agent.0 {
                f.push(g.rel_x(me.position, other.position));
                f.push(g.rel_y(me.position, other.position));
            }
        }
        let key = (g.index_of(me.position) * (self.config.task_length + 1) + me.task.completed) as u64;
        Observation { key, features: f }
    }

    fn observation_len(&self) -> usize {
        let n = self.config.grid.n_agents;
        let machines = self.config.machine_types * self.config.machines_per_type;
        2 + 4 * machines + self.config.machine_types + 1 + 1 + 2 + 2 * (n - 1)
    }

    /// Zero up to every agent completing its task.
    fn episode_return_bounds(&self) -> (f64, f64) {
        let max = self
            .agents
            .iter()
            .map(|a| self.reward_for(a.task.priority))
            .sum();
        (0.0, max)
    }

    fn agent_group(&self, agent: AgentId) -> AgentGroup {
        match self.agents.get(agent.0).map(|a| a.task.priority) {
            Some(Priority::Low) => AgentGroup::Low,
            _ => AgentGroup::High,
        }
    }

    /// Active machines as `M`/`N`/..., inactive ones as `-`, agents as hex
    /// digits (`*` when several share a cell).
    fn render(&self) -> String {
        let mut canvas = Canvas::new(&self.config.grid);
        for m in &self.machines {
            let ch = if m.is_active(self.step) {
                (b'M' + m.machine_type as u8) as char
            } else {
                '-'
            };
            canvas.put(m.position, ch);
        }
        canvas.put_agents(self.agents.iter().map(|a| a.position));
        canvas.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::env_rng;

    fn factory() -> Smartfactory {
        Smartfactory::new(SmartfactoryConfig::default()).unwrap()
    }

    fn task(required: &[usize], priority: Priority) -> Task {
        Task {
            required: required.to_vec(),
            completed: 0,
            priority,
        }
    }

    const RIGHT: EnvAction = EnvAction(3);
    const STAY: EnvAction = EnvAction(4);

    #[test]
    fn reset_layout() {
        let mut env = factory();
        let mut rng = env_rng(11);
        env.reset(&mut rng);
        let high = (0..4)
            .filter(|&i| env.task(AgentId(i)).priority == Priority::High)
            .count();
        assert_eq!(high, 2);
        for i in 0..4 {
            assert_eq!(env.task(AgentId(i)).completed, 0);
            assert_eq!(env.task(AgentId(i)).required.len(), 3);
        }
        assert_eq!(env.machines().len(), 4);
        let mut cells: Vec<Cell> = env.machines().iter().map(|m| m.position).collect();
        cells.extend((0..4).map(|i| env.position(AgentId(i))));
        let set: std::collections::HashSet<_> = cells.iter().collect();
        assert_eq!(set.len(), 8);

        let mut again = factory();
        again.reset(&mut env_rng(11));
        assert_eq!(env.render(), again.render());
    }

    #[test]
    fn odd_agent_count_rounds_up() {
        let mut cfg = SmartfactoryConfig::default();
        cfg.grid.n_agents = 5;
        let mut env = Smartfactory::new(cfg).unwrap();
        env.reset(&mut env_rng(2));
        let high = (0..5)
            .filter(|&i| env.task(AgentId(i)).priority == Priority::High)
            .count();
        assert_eq!(high, 3);
    }

    #[test]
    fn grid_too_small() {
        let mut cfg = SmartfactoryConfig::default();
        cfg.grid.width = 2;
        cfg.grid.height = 2;
        assert!(matches!(Smartfactory::new(cfg), Err(Error::GridTooSmall { .. })));
    }

    fn one_agent_env(required: &[usize], priority: Priority) -> Smartfactory {
        let mut cfg = SmartfactoryConfig::default();
        cfg.grid.n_agents = 1;
        let mut env = Smartfactory::new(cfg).unwrap();
        // type 0 at (1,0), type 1 at (3,0)
        env.reset_with(
            vec![(Cell::new(0, 0), task(required, priority))],
            vec![(0, Cell::new(1, 0)), (1, Cell::new(3, 0))],
        );
        env
    }

    #[test]
    fn sparse_reward_on_completion() {
        let mut env = one_agent_env(&[0, 1, 1], Priority::High);
        let mut rng = env_rng(0);
        // enter type-0 machine
        let out = env.step(&[RIGHT], &mut rng).unwrap();
        assert_eq!(out.rewards, vec![0.0]);
        assert_eq!(env.task(AgentId(0)).completed, 1);
        env.step(&[RIGHT], &mut rng).unwrap();
        let out = env.step(&[RIGHT], &mut rng).unwrap();
        assert_eq!(out.rewards, vec![0.0]);
        assert_eq!(env.task(AgentId(0)).completed, 2);
        // the type-1 machine is now inactive; wait on it
        let mut total = 0.0;
        let mut waited = 0;
        loop {
            let out = env.step(&[STAY], &mut rng).unwrap();
            waited += 1;
            total += out.rewards[0];
            if env.task(AgentId(0)).is_complete() {
                assert!(out.done);
                break;
            }
        }
        assert_eq!(waited, 9);
        assert_eq!(total, 5.0);
        assert_eq!(env.step(&[STAY], &mut rng), Err(Error::EpisodeDone));
    }

    #[test]
    fn low_priority_reward() {
        let mut env = one_agent_env(&[0, 0, 0], Priority::Low);
        let mut rng = env_rng(0);
        let mut total = 0.0;
        for _ in 0..30 {
            if env.is_finished() {
                break;
            }
            let a = if env.position(AgentId(0)) == Cell::new(1, 0) { STAY } else { RIGHT };
            total += env.step(&[a], &mut rng).unwrap().rewards[0];
        }
        assert_eq!(total, 1.0);
    }

    #[test]
    fn inactivity_window_is_exact() {
        let mut cfg = SmartfactoryConfig::default();
        cfg.grid.n_agents = 2;
        let mut env = Smartfactory::new(cfg).unwrap();
        let mut rng = env_rng(0);
        env.reset_with(
            vec![
                (Cell::new(0, 0), task(&[0, 1, 1], Priority::High)),
                (Cell::new(1, 0), task(&[0, 1, 1], Priority::Low)),
            ],
            vec![(0, Cell::new(1, 0)), (1, Cell::new(5, 5))],
        );
        // step 0: agent 1 stands on the machine and activates it
        env.step(&[STAY, STAY], &mut rng).unwrap();
        assert_eq!(env.task(AgentId(1)).completed, 1);
        // agent 0 stands on it from step 1 on
        let mut activated_at = None;
        for t in 1..=12 {
            let a0 = if t == 1 { RIGHT } else { STAY };
            env.step(&[a0, RIGHT], &mut rng).unwrap();
            if activated_at.is_none() && env.task(AgentId(0)).completed == 1 {
                activated_at = Some(t);
            }
        }
        assert_eq!(activated_at, Some(9));
    }

    #[test]
    fn reward_paid_once_and_progress_monotone() {
        let mut env = factory();
        let mut rng = env_rng(5);
        use rand::Rng;
        for _ in 0..5 {
            env.reset(&mut rng);
            let mut paid = [0usize; 4];
            let mut progress = [0usize; 4];
            while !env.is_finished() {
                let acts: Vec<EnvAction> = (0..4).map(|_| EnvAction(rng.random_range(0..5))).collect();
                let out = env.step(&acts, &mut rng).unwrap();
                for i in 0..4 {
                    if out.rewards[i] > 0.0 {
                        paid[i] += 1;
                    }
                    let c = env.task(AgentId(i)).completed;
                    assert!(c >= progress[i]);
                    progress[i] = c;
                    let p = env.position(AgentId(i));
                    assert!(p.x < 12 && p.y < 8);
                }
            }
            assert!(paid.iter().all(|&p| p <= 1));
            assert!(env.current_step() <= 200);
        }
    }

    #[test]
    fn observation_shape_and_locality() {
        let mut env = factory();
        let mut rng = env_rng(8);
        env.reset(&mut rng);
        let b = BalanceSheet::new(4);
        let o = env.observe(AgentId(0), &b);
        assert_eq!(o.features.len(), env.observation_len());
        assert_eq!(env.observation_len(), 30);
        assert!(o.features.iter().all(|v| (0.0..=1.0).contains(v)));

        let mut moved = env.clone();
        let p = moved.agents[2].position;
        moved.agents[2].position = if p.x > 0 { Cell::new(p.x - 1, p.y) } else { Cell::new(p.x + 1, p.y) };
        let o2 = moved.observe(AgentId(0), &b);
        let diff: Vec<usize> = (0..o.features.len()).filter(|&k| o.features[k] != o2.features[k]).collect();
        // other agents' block: agent 2 is the second "other"
        let other_block = env.observation_len() - 2 * 3 + 2;
        assert_eq!(diff, vec![other_block]);

        for _ in 0..20 {
            if env.is_finished() {
                break;
            }
            env.step(&[EnvAction(0), EnvAction(1), EnvAction(2), EnvAction(3)], &mut rng).unwrap();
            assert_eq!(env.observe(AgentId(1), &b).features.len(), 30);
        }
    }

    #[test]
    fn render_golden() {
        let mut cfg = SmartfactoryConfig::default();
        cfg.grid = GridConfig {
            width: 5,
            height: 3,
            n_agents: 2,
            steps_per_episode: 10,
        };
        let mut env = Smartfactory::new(cfg).unwrap();
        env.reset_with(
            vec![
                (Cell::new(0, 0), task(&[0, 1, 0], Priority::High)),
                (Cell::new(4, 2), task(&[1, 1, 0], Priority::Low)),
            ],
            vec![(0, Cell::new(1, 0)), (1, Cell::new(2, 1)), (0, Cell::new(3, 2))],
        );
        assert_eq!(env.render(), "0M...\n..N..\n...M1");
        env.step(&[RIGHT, STAY], &mut env_rng(0)).unwrap();
        assert_eq!(env.render(), ".0...\n..N..\n...M1");
    }
}

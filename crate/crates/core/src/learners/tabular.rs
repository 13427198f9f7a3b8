use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{epsilon_greedy, EpsilonSchedule, Learner, Transition};
use crate::error::{Error, Result};
use crate::game::{Observation, SmgRng};

/// Action values per state key; unseen entries read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: HashMap<u64, Vec<f64>>,
}

impl QTable {
    pub fn new(n_actions: usize) -> Self {
        Self {
            n_actions,
            values: HashMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: u64, a: usize) -> f64 {
        self.values.get(&s).map_or(0.0, |row| row[a])
    }

    pub fn row(&self, s: u64) -> Vec<f64> {
        self.values
            .get(&s)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn max(&self, s: u64) -> f64 {
        self.values
            .get(&s)
            .map_or(0.0, |row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn set(&mut self, s: u64, a: usize, v: f64) {
        let n = self.n_actions;
        self.values.entry(s).or_insert_with(|| vec![0.0; n])[a] = v;
    }

    /// States in ascending key order.
    pub fn states(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self.values.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .values()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`; a terminal
/// `s_next` bootstraps with 0.
pub fn q_update(table: &mut QTable, s: u64, a: usize, r: f64, s_next: Option<u64>, alpha: f64, gamma: f64) {
    let bootstrap = s_next.map_or(0.0, |n| table.max(n));
    let q = table.get(s, a);
    table.set(s, a, q + alpha * (r + gamma * bootstrap - q));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabularConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: EpsilonSchedule::new(1.0, 0.01, 2000),
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TabularQ {
    config: TabularConfig,
    table: QTable,
    steps: u64,
}

impl TabularQ {
    pub fn new(n_actions: usize, config: TabularConfig) -> Self {
        Self {
            config,
            table: QTable::new(n_actions),
            steps: 0,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.steps)
    }

    pub fn greedy(&self, obs: &Observation) -> usize {
        super::nn::argmax(&self.table.row(obs.key))
    }
}

impl Learner for TabularQ {
    fn n_actions(&self) -> usize {
        self.table.n_actions
    }

    fn act(&mut self, obs: &Observation, rng: &mut SmgRng) -> usize {
        epsilon_greedy(&self.table.row(obs.key), self.epsilon(), rng)
    }

    fn learn(&mut self, t: &Transition<'_>, _rng: &mut SmgRng) -> Result<()> {
        let next = (!t.done).then_some(t.next_obs.key);
        q_update(
            &mut self.table,
            t.obs.key,
            t.action,
            t.reward,
            next,
            self.config.alpha,
            self.config.gamma,
        );
        self.steps += 1;
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        self.table
            .states()
            .into_iter()
            .flat_map(|s| self.table.row(s))
            .collect()
    }
}

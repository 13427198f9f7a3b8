use serde::{Deserialize, Serialize};

use super::nn::{Activation, Mlp};
use super::{epsilon_greedy, Adam, EpsilonSchedule, Experience, Learner, ReplayBuffer, Transition};
use crate::error::Result;
use crate::game::{Observation, SmgRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync: u64,
    pub epsilon: EpsilonSchedule,
    /// Gradient step every `train_every` environment steps.
    pub train_every: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            lr: 5e-4,
            gamma: 0.95,
            batch_size: 32,
            replay_capacity: 10_000,
            target_sync: 500,
            epsilon: EpsilonSchedule::new(1.0, 0.1, 10_000),
            train_every: 4,
        }
    }
}

pub fn huber(e: f64) -> f64 {
    if e.abs() <= 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

pub fn huber_grad(e: f64) -> f64 {
    e.clamp(-1.0, 1.0)
}

/// Mean Huber loss of the chosen-action values against the TD targets
/// `r + gamma * max_a' Q_target(s', a')` (no bootstrap at terminals), and
/// its gradient with respect to the online parameters.
pub fn dqn_loss_and_grad(online: &Mlp, target: &Mlp, batch: &[&Experience], gamma: f64) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; online.n_params()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let mut upstream = vec![0.0; online.output_len()];
    for e in batch {
        let bootstrap = if e.done {
            0.0
        } else {
            target
                .forward(&e.next_obs)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let y = e.reward + gamma * bootstrap;
        let cache = online.forward_cached(&e.obs)?;
        let err = cache.output()[e.action] - y;
        loss += huber(err) * scale;
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[e.action] = huber_grad(err) * scale;
        online.backward(&cache, &upstream, &mut grad)?;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    online: Mlp,
    target: Mlp,
    replay: ReplayBuffer,
    optimizer: Adam,
    steps: u64,
}

impl DqnAgent {
    pub fn new(obs_len: usize, n_actions: usize, config: DqnConfig, rng: &mut SmgRng) -> Self {
        let online = Mlp::with_hidden(obs_len, &config.hidden, n_actions, Activation::Elu, rng);
        let target = online.clone();
        let optimizer = Adam::new(online.n_params(), config.lr);
        let replay = ReplayBuffer::new(config.replay_capacity);
        Self {
            config,
            online,
            target,
            replay,
            optimizer,
            steps: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.steps)
    }

    pub fn remember(&mut self, e: Experience) {
        self.replay.push(e);
    }

    /// One optimizer step on a uniformly sampled minibatch; returns the loss.
    pub fn train_step(&mut self, rng: &mut SmgRng) -> Result<f64> {
        let batch = self.replay.sample(self.config.batch_size, rng)?;
        let (loss, grad) = dqn_loss_and_grad(&self.online, &self.target, &batch, self.config.gamma)?;
        self.optimizer.step(self.online.params_mut(), &grad);
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.online.forward(&obs.features)
    }
}

impl Learner for DqnAgent {
    fn n_actions(&self) -> usize {
        self.online.output_len()
    }

    fn act(&mut self, obs: &Observation, rng: &mut SmgRng) -> usize {
        let q = self.online.forward(&obs.features).expect("observation length fixed by the environment");
        epsilon_greedy(&q, self.epsilon(), rng)
    }

    fn learn(&mut self, t: &Transition<'_>, rng: &mut SmgRng) -> Result<()> {
        self.replay.push(Experience {
            obs: t.obs.features.clone(),
            action: t.action,
            reward: t.reward,
            next_obs: t.next_obs.features.clone(),
            done: t.done,
        });
        self.steps += 1;
        if self.steps.is_multiple_of(self.config.train_every.max(1)) && self.replay.len() >= self.config.batch_size {
            self.train_step(rng)?;
        }
        if self.steps.is_multiple_of(self.config.target_sync.max(1)) {
            self.sync_target();
        }
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        self.online.params().to_vec()
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{entropy, log_softmax, softmax, Activation, Mlp};
use super::{Adam, Learner, Transition};
use crate::error::{Error, Result};
use crate::game::{Observation, SmgRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub clip: f64,
    pub epochs: usize,
    pub update_period: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            lr: 0.002,
            gamma: 0.95,
            clip: 0.2,
            epochs: 4,
            update_period: 5000,
            entropy_coef: 0.01,
            value_coef: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// `pi(a|s) / pi_old(a|s)` for categorical policies given by the softmax of
/// each network's outputs.
pub fn ppo_ratio(actor: &Mlp, old_actor: &Mlp, s: &[f64], a: usize) -> Result<f64> {
    let lp = log_softmax(&actor.forward(s)?)[a];
    let old = log_softmax(&old_actor.forward(s)?)[a];
    Ok((lp - old).exp())
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Discounted returns computed backwards; `done` cuts the sum and the
/// value after the last step is `tail`.
pub fn monte_carlo_returns(rewards: &[f64], dones: &[bool], gamma: f64, tail: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = tail;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            g = 0.0;
        }
        g = rewards[t] + gamma * g;
        out[t] = g;
    }
    out
}

/// Zero mean, unit variance; a constant batch only loses its mean.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-8 {
            *a /= std;
        }
    }
}

/// Loss `-mean(min(r A, clip(r) A) + c_H H)` and its gradient with respect
/// to the actor parameters. Returns `(loss, grad, mean entropy)`.
pub fn actor_loss_and_grad(
    actor: &Mlp,
    obs: &[Vec<f64>],
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    if obs.is_empty() {
        return Err(Error::EmptyRollout);
    }
    let scale = 1.0 / obs.len() as f64;
    let mut grad = vec![0.0; actor.n_params()];
    let mut loss = 0.0;
    let mut mean_entropy = 0.0;
    for i in 0..obs.len() {
        let cache = actor.forward_cached(&obs[i])?;
        let logp = log_softmax(cache.output());
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = actions[i];
        let adv = advantages[i];
        let ratio = (logp[a] - old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let surrogate = clipped_surrogate(ratio, adv, clip);
        let h = entropy(cache.output());
        loss -= (surrogate + entropy_coef * h) * scale;
        mean_entropy += h * scale;

        // d(objective)/d(logits), then negated for the loss.
        let mut upstream = vec![0.0; probs.len()];
        if unclipped <= surrogate {
            for (k, u) in upstream.iter_mut().enumerate() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                *u += adv * ratio * (onehot - probs[k]);
            }
        }
        if entropy_coef != 0.0 {
            for (k, u) in upstream.iter_mut().enumerate() {
                let lp = if probs[k] > 0.0 { logp[k] } else { 0.0 };
                *u -= entropy_coef * probs[k] * (lp + h);
            }
        }
        for u in upstream.iter_mut() {
            *u *= -scale;
        }
        actor.backward(&cache, &upstream, &mut grad)?;
    }
    Ok((loss, grad, mean_entropy))
}

/// `value_coef * mean((V(s) - G)^2)` and its gradient.
pub fn critic_loss_and_grad(critic: &Mlp, obs: &[Vec<f64>], returns: &[f64], value_coef: f64) -> Result<(f64, Vec<f64>)> {
    if obs.is_empty() {
        return Err(Error::EmptyRollout);
    }
    let scale = value_coef / obs.len() as f64;
    let mut grad = vec![0.0; critic.n_params()];
    let mut loss = 0.0;
    for (o, g) in obs.iter().zip(returns) {
        let cache = critic.forward_cached(o)?;
        let err = cache.output()[0] - g;
        loss += scale * err * err;
        critic.backward(&cache, &[2.0 * scale * err], &mut grad)?;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    config: PpoConfig,
    actor: Mlp,
    old_actor: Mlp,
    critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    rollout: Vec<RolloutStep>,
    last_next_obs: Vec<f64>,
    updates: u64,
}

impl PpoAgent {
    pub fn new(obs_len: usize, n_actions: usize, config: PpoConfig, rng: &mut SmgRng) -> Self {
        let actor = Mlp::with_hidden(obs_len, &config.hidden, n_actions, Activation::Tanh, rng);
        let critic = Mlp::with_hidden(obs_len, &config.hidden, 1, Activation::Tanh, rng);
        Self {
            actor_opt: Adam::new(actor.n_params(), config.lr),
            critic_opt: Adam::new(critic.n_params(), config.lr),
            old_actor: actor.clone(),
            actor,
            critic,
            rollout: Vec::new(),
            last_next_obs: vec![0.0; obs_len],
            updates: 0,
            config,
        }
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn old_actor(&self) -> &Mlp {
        &self.old_actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn rollout_len(&self) -> usize {
        self.rollout.len()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.actor.forward(obs)?))
    }

    pub fn record(&mut self, step: RolloutStep, next_obs: &[f64]) {
        self.rollout.push(step);
        self.last_next_obs.clear();
        self.last_next_obs.extend_from_slice(next_obs);
    }

    /// Full-batch clipped-surrogate update on the collected rollout, then
    /// refreshes the old actor and clears the rollout.
    pub fn update(&mut self) -> Result<PpoLosses> {
        if self.rollout.is_empty() {
            return Err(Error::EmptyRollout);
        }
        let obs: Vec<Vec<f64>> = self.rollout.iter().map(|s| s.obs.clone()).collect();
        let actions: Vec<usize> = self.rollout.iter().map(|s| s.action).collect();
        let rewards: Vec<f64> = self.rollout.iter().map(|s| s.reward).collect();
        let dones: Vec<bool> = self.rollout.iter().map(|s| s.done).collect();
        let tail = if *dones.last().unwrap() {
            0.0
        } else {
            self.critic.forward(&self.last_next_obs)?[0]
        };
        let returns = monte_carlo_returns(&rewards, &dones, self.config.gamma, tail);
        let mut advantages = Vec::with_capacity(obs.len());
        for (o, g) in obs.iter().zip(&returns) {
            advantages.push(g - self.critic.forward(o)?[0]);
        }
        normalize_advantages(&mut advantages);
        let old_log_probs = obs
            .iter()
            .zip(&actions)
            .map(|(o, &a)| Ok(log_softmax(&self.old_actor.forward(o)?)[a]))
            .collect::<Result<Vec<f64>>>()?;

        let mut losses = PpoLosses::default();
        for _ in 0..self.config.epochs {
            let (policy, grad, h) = actor_loss_and_grad(
                &self.actor,
                &obs,
                &actions,
                &old_log_probs,
                &advantages,
                self.config.clip,
                self.config.entropy_coef,
            )?;
            self.actor_opt.step(self.actor.params_mut(), &grad);
            let (value, grad) = critic_loss_and_grad(&self.critic, &obs, &returns, self.config.value_coef)?;
            self.critic_opt.step(self.critic.params_mut(), &grad);
            losses = PpoLosses {
                policy,
                value,
                entropy: h,
            };
        }
        self.old_actor.copy_from(&self.actor);
        self.rollout.clear();
        self.updates += 1;
        Ok(losses)
    }
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl Learner for PpoAgent {
    fn n_actions(&self) -> usize {
        self.actor.output_len()
    }

    fn act(&mut self, obs: &Observation, rng: &mut SmgRng) -> usize {
        let probs = self.policy(&obs.features).expect("observation length fixed by the environment");
        sample_categorical(&probs, rng)
    }

    fn learn(&mut self, t: &Transition<'_>, _rng: &mut SmgRng) -> Result<()> {
        self.record(
            RolloutStep {
                obs: t.obs.features.clone(),
                action: t.action,
                reward: t.reward,
                done: t.done,
            },
            &t.next_obs.features,
        );
        if self.rollout.len() >= self.config.update_period {
            self.update()?;
        }
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = self.actor.params().to_vec();
        p.extend_from_slice(self.critic.params());
        p
    }
}

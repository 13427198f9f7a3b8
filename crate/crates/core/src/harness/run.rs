use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::env::MarketEnv;
use crate::error::{Error, Result};
use crate::game::{agent_rng, derive_run_seed, env_rng, normalize_return, AgentGroup, AgentId, Environment, SmgRng};
use crate::learners::{DqnAgent, Learner, LearnerKind, PpoAgent, TabularQ, Transition};
use crate::market::MarketActionIndex;

/// Everything recorded during one training run. Per-episode tables are
/// indexed `[episode][agent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: usize,
    pub seed: u64,
    pub n_agents: usize,
    pub groups: Vec<Vec<AgentGroup>>,
    pub raw_returns: Vec<Vec<f64>>,
    pub post_returns: Vec<Vec<f64>>,
    /// Trades the agent took part in, as seller or buyer.
    pub trades: Vec<Vec<usize>>,
    /// Amount the agent still owes at the end of the episode.
    pub liabilities: Vec<Vec<f64>>,
    pub bounds: Vec<(f64, f64)>,
    pub steps: Vec<usize>,
    /// Environmental actions of the final step of each episode.
    pub last_env_actions: Vec<Vec<usize>>,
    /// Row-major balance sheet at the end of the last episode.
    pub final_balance: Vec<f64>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunResult {
    pub fn n_episodes(&self) -> usize {
        self.raw_returns.len()
    }

    pub fn overall_raw(&self, episode: usize) -> f64 {
        self.raw_returns[episode].iter().sum()
    }

    pub fn overall_post(&self, episode: usize) -> f64 {
        self.post_returns[episode].iter().sum()
    }

    pub fn normalized(&self, episode: usize) -> f64 {
        let (lo, hi) = self.bounds[episode];
        normalize_return(self.overall_raw(episode), lo, hi).unwrap_or(0.0)
    }

    /// Episodes of the final `fraction` of the run (at least one).
    pub fn final_window(&self, fraction: f64) -> std::ops::Range<usize> {
        let n = self.n_episodes();
        let len = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        n - len.min(n)..n
    }

    pub fn total_trades(&self) -> usize {
        // each trade involves two agents
        self.trades.iter().flatten().sum::<usize>() / 2
    }

    /// Largest per-episode gap between summed post-market and raw returns.
    pub fn conservation_error(&self) -> f64 {
        (0..self.n_episodes())
            .map(|e| (self.overall_post(e) - self.overall_raw(e)).abs())
            .fold(0.0, f64::max)
    }
}

/// One learner per agent together with the agent's random stream, which
/// initialization has already advanced.
pub fn build_learners(
    config: &ExperimentConfig,
    env: &MarketEnv<Box<dyn Environment>>,
    seed: u64,
) -> (Vec<Box<dyn Learner>>, Vec<SmgRng>) {
    let n_actions = env.space().size();
    let obs_len = env.env().observation_len();
    let total = config.total_steps();
    (0..env.n_agents())
        .map(|i| {
            let mut rng = agent_rng(seed, AgentId(i));
            let l: Box<dyn Learner> = match config.learner.kind {
                LearnerKind::Tabular => Box::new(TabularQ::new(n_actions, config.learner.tabular(total))),
                LearnerKind::Dqn => Box::new(DqnAgent::new(obs_len, n_actions, config.learner.dqn(total), &mut rng)),
                LearnerKind::Ppo => Box::new(PpoAgent::new(obs_len, n_actions, config.learner.ppo(), &mut rng)),
            };
            (l, rng)
        })
        .unzip()
}

/// Trains independent learners on `config` for run `run_id`.
pub fn run_training(config: &ExperimentConfig, run_id: usize) -> Result<RunResult> {
    config.validate()?;
    let seed = derive_run_seed(config.master_seed, run_id);
    let mut env = MarketEnv::new(config.build_env()?, config.market);
    let (mut learners, mut streams) = build_learners(config, &env, seed);
    train(config, run_id, seed, &mut env, &mut learners, &mut streams)
}

/// Training loop with caller-supplied learners.
pub fn run_with_learners(config: &ExperimentConfig, run_id: usize, learners: &mut [Box<dyn Learner>]) -> Result<RunResult> {
    config.validate()?;
    let seed = derive_run_seed(config.master_seed, run_id);
    let mut env = MarketEnv::new(config.build_env()?, config.market);
    let n_actions = env.space().size();
    if learners.len() != env.n_agents() {
        return Err(Error::DimensionMismatch {
            expected: env.n_agents(),
            actual: learners.len(),
        });
    }
    for l in learners.iter() {
        if l.n_actions() != n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_actions,
                actual: l.n_actions(),
            });
        }
    }
    let mut streams: Vec<SmgRng> = (0..learners.len()).map(|i| agent_rng(seed, AgentId(i))).collect();
    train(config, run_id, seed, &mut env, learners, &mut streams)
}

fn train(
    config: &ExperimentConfig,
    run_id: usize,
    seed: u64,
    env: &mut MarketEnv<Box<dyn Environment>>,
    learners: &mut [Box<dyn Learner>],
    agent_streams: &mut [SmgRng],
) -> Result<RunResult> {
    let start = Instant::now();
    let n = env.n_agents();
    let mut env_stream = env_rng(seed);

    let e_total = config.n_episodes;
    let mut result = RunResult {
        run_id,
        seed,
        n_agents: n,
        groups: Vec::with_capacity(e_total),
        raw_returns: Vec::with_capacity(e_total),
        post_returns: Vec::with_capacity(e_total),
        trades: Vec::with_capacity(e_total),
        liabilities: Vec::with_capacity(e_total),
        bounds: Vec::with_capacity(e_total),
        steps: Vec::with_capacity(e_total),
        last_env_actions: Vec::with_capacity(e_total),
        final_balance: Vec::new(),
        wall_clock_secs: 0.0,
    };

    let mut actions = vec![MarketActionIndex(0); n];
    for _ in 0..e_total {
        env.reset(&mut env_stream);
        result.groups.push((0..n).map(|i| env.env().agent_group(AgentId(i))).collect());
        result.bounds.push(env.env().episode_return_bounds());
        let mut raw = vec![0.0; n];
        let mut post = vec![0.0; n];
        let mut trades = vec![0usize; n];
        let mut last_env = vec![0usize; n];
        let mut obs: Vec<_> = (0..n).map(|i| env.observe(AgentId(i))).collect();
        let mut steps = 0;
        for _ in 0..config.steps_per_episode {
            for i in 0..n {
                actions[i] = MarketActionIndex(learners[i].act(&obs[i], &mut agent_streams[i]));
            }
            let out = env.step_indices(&actions, &mut env_stream)?;
            steps += 1;
            let next: Vec<_> = (0..n).map(|i| env.observe(AgentId(i))).collect();
            for i in 0..n {
                learners[i].learn(
                    &Transition {
                        obs: &obs[i],
                        action: actions[i].0,
                        reward: out.rewards[i],
                        next_obs: &next[i],
                        done: out.done,
                    },
                    &mut agent_streams[i],
                )?;
                raw[i] += out.raw[i];
                post[i] += out.rewards[i];
                trades[i] += out.trades.involving(i);
                last_env[i] = out.joint[i].env.0;
            }
            obs = next;
            if out.done {
                break;
            }
        }
        let balance = env.market().balance();
        result.liabilities.push((0..n).map(|i| balance.owed_by(i)).collect());
        result.raw_returns.push(raw);
        result.post_returns.push(post);
        result.trades.push(trades);
        result.steps.push(steps);
        result.last_env_actions.push(last_env);
    }
    result.final_balance = env.market().balance().to_rows();
    result.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

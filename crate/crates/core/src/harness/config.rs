//! Experiment configuration and its flat `key = value` text form.
//!
//! Keys are field paths (`learner.lr`, `market.price`, ...). `env` and
//! `learner.kind` select the preset the remaining keys override, so they may
//! appear anywhere in the file.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{
    ConflictParams, GridConfig, MatrixGame, Payoff2x2, PdPayoffs, Refinery, RefineryConfig, Smartfactory,
    SmartfactoryConfig,
};
use crate::error::{Error, Result};
use crate::game::Environment;
use crate::learners::{DqnConfig, EpsilonSchedule, LearnerKind, PpoConfig, TabularConfig};
use crate::market::MarketConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    PrisonersDilemma,
    Conflict,
    Smartfactory,
    Refinery,
}

impl EnvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::PrisonersDilemma => "pd",
            EnvKind::Conflict => "conflict",
            EnvKind::Smartfactory => "smartfactory",
            EnvKind::Refinery => "refinery",
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, EnvKind::PrisonersDilemma | EnvKind::Conflict)
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd" | "prisoners-dilemma" | "prisoners_dilemma" => Ok(EnvKind::PrisonersDilemma),
            "conflict" => Ok(EnvKind::Conflict),
            "smartfactory" => Ok(EnvKind::Smartfactory),
            "refinery" => Ok(EnvKind::Refinery),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

/// Hyperparameters of all learner kinds; only those of `kind` are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub kind: LearnerKind,
    pub alpha: f64,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// `None` decays over the first 10% of all training steps.
    pub eps_horizon: Option<u64>,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync: u64,
    pub train_every: u64,
    pub hidden: Vec<usize>,
    pub clip: f64,
    pub epochs: usize,
    pub update_period: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl LearnerParams {
    pub fn defaults(kind: LearnerKind) -> Self {
        let dqn = DqnConfig::default();
        let ppo = PpoConfig::default();
        let tab = TabularConfig::default();
        let mut p = Self {
            kind,
            alpha: tab.alpha,
            gamma: dqn.gamma,
            eps_start: dqn.epsilon.start,
            eps_end: dqn.epsilon.end,
            eps_horizon: None,
            lr: dqn.lr,
            batch_size: dqn.batch_size,
            replay_capacity: dqn.replay_capacity,
            target_sync: dqn.target_sync,
            train_every: dqn.train_every,
            hidden: dqn.hidden.clone(),
            clip: ppo.clip,
            epochs: ppo.epochs,
            update_period: ppo.update_period,
            entropy_coef: ppo.entropy_coef,
            value_coef: ppo.value_coef,
        };
        match kind {
            LearnerKind::Tabular => {
                p.gamma = tab.gamma;
                p.eps_start = tab.epsilon.start;
                p.eps_end = tab.epsilon.end;
                p.eps_horizon = Some(tab.epsilon.horizon);
            }
            LearnerKind::Dqn => {}
            LearnerKind::Ppo => {
                p.gamma = ppo.gamma;
                p.lr = ppo.lr;
                p.hidden = ppo.hidden.clone();
            }
        }
        p
    }

    pub fn epsilon(&self, total_steps: u64) -> EpsilonSchedule {
        let horizon = self.eps_horizon.unwrap_or(total_steps / 10);
        EpsilonSchedule::new(self.eps_start, self.eps_end, horizon)
    }

    pub fn tabular(&self, total_steps: u64) -> TabularConfig {
        TabularConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon(total_steps),
        }
    }

    pub fn dqn(&self, total_steps: u64) -> DqnConfig {
        DqnConfig {
            hidden: self.hidden.clone(),
            lr: self.lr,
            gamma: self.gamma,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            target_sync: self.target_sync,
            epsilon: self.epsilon(total_steps),
            train_every: self.train_every,
        }
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            hidden: self.hidden.clone(),
            lr: self.lr,
            gamma: self.gamma,
            clip: self.clip,
            epochs: self.epochs,
            update_period: self.update_period,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub n_agents: usize,
    pub n_episodes: usize,
    pub steps_per_episode: usize,
    pub n_runs: usize,
    pub master_seed: u64,
    pub output: Option<String>,
    /// Memory-1 observation keys in matrix games.
    pub matrix_memory: bool,
    pub pd: PdPayoffs,
    pub conflict: ConflictParams,
    pub grid_width: usize,
    pub grid_height: usize,
    pub smartfactory: SmartfactoryConfig,
    pub refinery: RefineryConfig,
    pub learner: LearnerParams,
    pub market: MarketConfig,
}

impl ExperimentConfig {
    /// Defaults for an environment. Matrix games run each round as a
    /// one-step episode, so `n_episodes` is the number of rounds.
    pub fn preset(env: EnvKind, learner: LearnerKind) -> Self {
        let grid = GridConfig::default();
        let (n_agents, n_episodes, steps, n_runs) = match env {
            EnvKind::PrisonersDilemma => (2, 4000, 1, 200),
            EnvKind::Conflict => (2, 4000, 1, 25),
            EnvKind::Smartfactory | EnvKind::Refinery => (grid.n_agents, 2000, grid.steps_per_episode, 20),
        };
        Self {
            env,
            n_agents,
            n_episodes,
            steps_per_episode: steps,
            n_runs,
            master_seed: 0,
            output: None,
            matrix_memory: false,
            pd: PdPayoffs::default(),
            conflict: ConflictParams::with_alpha(0.0),
            grid_width: grid.width,
            grid_height: grid.height,
            smartfactory: SmartfactoryConfig::default(),
            refinery: RefineryConfig::default(),
            learner: LearnerParams::defaults(learner),
            market: MarketConfig::none(),
        }
    }

    pub fn default_learner(env: EnvKind) -> LearnerKind {
        if env.is_matrix() {
            LearnerKind::Tabular
        } else {
            LearnerKind::Dqn
        }
    }

    pub fn for_env(env: EnvKind) -> Self {
        Self::preset(env, Self::default_learner(env))
    }

    pub fn total_steps(&self) -> u64 {
        (self.n_episodes * self.steps_per_episode) as u64
    }

    fn grid(&self) -> GridConfig {
        GridConfig {
            width: self.grid_width,
            height: self.grid_height,
            n_agents: self.n_agents,
            steps_per_episode: self.steps_per_episode,
        }
    }

    pub fn smartfactory_config(&self) -> SmartfactoryConfig {
        SmartfactoryConfig {
            grid: self.grid(),
            ..self.smartfactory
        }
    }

    pub fn refinery_config(&self) -> RefineryConfig {
        RefineryConfig {
            grid: self.grid(),
            ..self.refinery
        }
    }

    pub fn build_env(&self) -> Result<Box<dyn Environment>> {
        Ok(match self.env {
            EnvKind::PrisonersDilemma => {
                Box::new(MatrixGame::new(Payoff2x2::prisoners_dilemma(&self.pd)).with_memory(self.matrix_memory))
            }
            EnvKind::Conflict => {
                Box::new(MatrixGame::new(Payoff2x2::conflict(&self.conflict)).with_memory(self.matrix_memory))
            }
            EnvKind::Smartfactory => Box::new(Smartfactory::new(self.smartfactory_config())?),
            EnvKind::Refinery => Box::new(Refinery::new(self.refinery_config())?),
        })
    }

    /// Checks everything that can be checked before training starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_runs == 0 {
            return fail("n_runs must be at least 1".into());
        }
        if self.n_episodes == 0 || self.steps_per_episode == 0 {
            return fail("n_episodes and steps_per_episode must be positive".into());
        }
        if self.env.is_matrix() {
            if self.n_agents != 2 {
                return fail(format!("matrix games have 2 players, got n_agents = {}", self.n_agents));
            }
            if self.steps_per_episode != 1 {
                return fail("matrix games run one round per episode; set steps_per_episode = 1".into());
            }
        } else if self.n_agents == 0 {
            return fail("n_agents must be positive".into());
        }
        self.market.validate()?;
        let l = &self.learner;
        if !(0.0..1.0).contains(&l.gamma) {
            return Err(Error::InvalidDiscount(l.gamma));
        }
        if !(0.0..=1.0).contains(&l.eps_start) || !(0.0..=1.0).contains(&l.eps_end) {
            return fail("exploration rates must lie in [0, 1]".into());
        }
        match l.kind {
            LearnerKind::Tabular => l.tabular(self.total_steps()).validate()?,
            LearnerKind::Dqn => {
                if l.batch_size == 0 || l.replay_capacity < l.batch_size {
                    return fail("replay_capacity must be at least batch_size > 0".into());
                }
                if l.lr <= 0.0 || l.target_sync == 0 || l.train_every == 0 {
                    return fail("lr, target_sync and train_every must be positive".into());
                }
            }
            LearnerKind::Ppo => {
                if l.lr <= 0.0 || l.update_period == 0 || l.epochs == 0 || l.clip <= 0.0 {
                    return fail("lr, update_period, epochs and clip must be positive".into());
                }
            }
        }
        let env = self.build_env()?;
        if env.n_agents() != self.n_agents {
            return fail(format!("environment has {} agents, config says {}", env.n_agents(), self.n_agents));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let l = &mut self.learner;
        match key.trim() {
            "env" => {
                let env: EnvKind = v.parse()?;
                if env != self.env {
                    return Err(Error::Config("env can only be chosen through the preset".into()));
                }
            }
            "n_agents" => self.n_agents = num(key, v)?,
            "n_episodes" => self.n_episodes = num(key, v)?,
            "steps_per_episode" => self.steps_per_episode = num(key, v)?,
            "n_runs" => self.n_runs = num(key, v)?,
            "master_seed" => self.master_seed = num(key, v)?,
            "output" => self.output = (!v.is_empty() && v != "none").then(|| v.to_string()),
            "matrix.memory" => self.matrix_memory = num(key, v)?,
            "pd.temptation" => self.pd.temptation = num(key, v)?,
            "pd.reward" => self.pd.reward = num(key, v)?,
            "pd.punishment" => self.pd.punishment = num(key, v)?,
            "pd.sucker" => self.pd.sucker = num(key, v)?,
            "conflict.r1" => self.conflict.r1 = num(key, v)?,
            "conflict.r2" => self.conflict.r2 = num(key, v)?,
            "conflict.alpha" => self.conflict.alpha = num(key, v)?,
            "grid.width" => self.grid_width = num(key, v)?,
            "grid.height" => self.grid_height = num(key, v)?,
            "smartfactory.machine_types" => self.smartfactory.machine_types = num(key, v)?,
            "smartfactory.machines_per_type" => self.smartfactory.machines_per_type = num(key, v)?,
            "smartfactory.task_length" => self.smartfactory.task_length = num(key, v)?,
            "smartfactory.t_inactive" => self.smartfactory.t_inactive = num(key, v)?,
            "smartfactory.r_high" => self.smartfactory.r_high = num(key, v)?,
            "smartfactory.r_low" => self.smartfactory.r_low = num(key, v)?,
            "refinery.initial_raw" => self.refinery.initial_raw = num(key, v)?,
            "refinery.initial_refined" => self.refinery.initial_refined = num(key, v)?,
            "refinery.r_high" => self.refinery.r_high = num(key, v)?,
            "refinery.r_low" => self.refinery.r_low = num(key, v)?,
            "learner" | "learner.kind" => {
                let kind: LearnerKind = v.parse()?;
                if kind != l.kind {
                    return Err(Error::Config("learner.kind can only be chosen through the preset".into()));
                }
            }
            "learner.alpha" => l.alpha = num(key, v)?,
            "learner.gamma" => l.gamma = num(key, v)?,
            "learner.eps_start" => l.eps_start = num(key, v)?,
            "learner.eps_end" => l.eps_end = num(key, v)?,
            "learner.eps_horizon" => {
                l.eps_horizon = if v == "auto" { None } else { Some(num(key, v)?) };
            }
            "learner.lr" => l.lr = num(key, v)?,
            "learner.batch_size" => l.batch_size = num(key, v)?,
            "learner.replay_capacity" => l.replay_capacity = num(key, v)?,
            "learner.target_sync" => l.target_sync = num(key, v)?,
            "learner.train_every" => l.train_every = num(key, v)?,
            "learner.hidden" => {
                l.hidden = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?;
            }
            "learner.clip" => l.clip = num(key, v)?,
            "learner.epochs" => l.epochs = num(key, v)?,
            "learner.update_period" => l.update_period = num(key, v)?,
            "learner.entropy_coef" => l.entropy_coef = num(key, v)?,
            "learner.value_coef" => l.value_coef = num(key, v)?,
            "market.kind" => self.market.kind = v.parse()?,
            "market.price" => self.market.price = num(key, v)?,
            "market.dividend" => self.market.dividend = num(key, v)?,
            "market.allow_debt" => self.market.allow_debt = num(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses the text form. Lines are `key = value`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let find = |names: &[&str]| {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| names.contains(&k.as_str()))
                .map(|(_, v)| v.clone())
        };
        let env: EnvKind = find(&["env"])
            .ok_or_else(|| Error::Config("missing 'env'".into()))?
            .parse()?;
        let learner = match find(&["learner", "learner.kind"]) {
            Some(v) => v.parse()?,
            None => Self::default_learner(env),
        };
        let mut cfg = Self::preset(env, learner);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Every key with its current value; `parse(echo())` restores `self`.
    pub fn echo(&self) -> String {
        let l = &self.learner;
        let hidden = l.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
        let entries: Vec<(&str, String)> = vec![
            ("env", self.env.as_str().into()),
            ("n_agents", self.n_agents.to_string()),
            ("n_episodes", self.n_episodes.to_string()),
            ("steps_per_episode", self.steps_per_episode.to_string()),
            ("n_runs", self.n_runs.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("output", self.output.clone().unwrap_or_else(|| "none".into())),
            ("matrix.memory", self.matrix_memory.to_string()),
            ("pd.temptation", self.pd.temptation.to_string()),
            ("pd.reward", self.pd.reward.to_string()),
            ("pd.punishment", self.pd.punishment.to_string()),
            ("pd.sucker", self.pd.sucker.to_string()),
            ("conflict.r1", self.conflict.r1.to_string()),
            ("conflict.r2", self.conflict.r2.to_string()),
            ("conflict.alpha", self.conflict.alpha.to_string()),
            ("grid.width", self.grid_width.to_string()),
            ("grid.height", self.grid_height.to_string()),
            ("smartfactory.machine_types", self.smartfactory.machine_types.to_string()),
            ("smartfactory.machines_per_type", self.smartfactory.machines_per_type.to_string()),
            ("smartfactory.task_length", self.smartfactory.task_length.to_string()),
            ("smartfactory.t_inactive", self.smartfactory.t_inactive.to_string()),
            ("smartfactory.r_high", self.smartfactory.r_high.to_string()),
            ("smartfactory.r_low", self.smartfactory.r_low.to_string()),
            ("refinery.initial_raw", self.refinery.initial_raw.to_string()),
            ("refinery.initial_refined", self.refinery.initial_refined.to_string()),
            ("refinery.r_high", self.refinery.r_high.to_string()),
            ("refinery.r_low", self.refinery.r_low.to_string()),
            ("learner.kind", l.kind.as_str().into()),
            ("learner.alpha", l.alpha.to_string()),
            ("learner.gamma", l.gamma.to_string()),
            ("learner.eps_start", l.eps_start.to_string()),
            ("learner.eps_end", l.eps_end.to_string()),
            (
                "learner.eps_horizon",
                l.eps_horizon.map_or_else(|| "auto".into(), |h| h.to_string()),
            ),
            ("learner.lr", l.lr.to_string()),
            ("learner.batch_size", l.batch_size.to_string()),
            ("learner.replay_capacity", l.replay_capacity.to_string()),
            ("learner.target_sync", l.target_sync.to_string()),
            ("learner.train_every", l.train_every.to_string()),
            ("learner.hidden", hidden),
            ("learner.clip", l.clip.to_string()),
            ("learner.epochs", l.epochs.to_string()),
            ("learner.update_period", l.update_period.to_string()),
            ("learner.entropy_coef", l.entropy_coef.to_string()),
            ("learner.value_coef", l.value_coef.to_string()),
            ("market.kind", self.market.kind.as_str().into()),
            ("market.price", self.market.price.to_string()),
            ("market.dividend", self.market.dividend.to_string()),
            ("market.allow_debt", self.market.allow_debt.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

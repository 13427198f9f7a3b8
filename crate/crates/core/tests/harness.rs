use std::sync::{Arc, Mutex};

use smg_core::env::PdPayoffs;
use smg_core::harness::*;
use smg_core::learners::{Learner, LearnerKind, Transition};
use smg_core::market::MarketConfig;
use smg_core::{Observation, SmgRng};

/// Plays one fixed action and records every reward it is trained on.
struct Scripted {
    action: usize,
    n_actions: usize,
    seen: Arc<Mutex<Vec<f64>>>,
}

impl Learner for Scripted {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn act(&mut self, _obs: &Observation, _rng: &mut SmgRng) -> usize {
        self.action
    }

    fn learn(&mut self, t: &Transition<'_>, _rng: &mut SmgRng) -> smg_core::Result<()> {
        self.seen.lock().unwrap().push(t.reward);
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn scripted(actions: &[usize], n_actions: usize) -> (Vec<Box<dyn Learner>>, Vec<Arc<Mutex<Vec<f64>>>>) {
    let logs: Vec<_> = actions.iter().map(|_| Arc::new(Mutex::new(Vec::new()))).collect();
    let learners = actions
        .iter()
        .zip(&logs)
        .map(|(&action, seen)| {
            Box::new(Scripted {
                action,
                n_actions,
                seen: seen.clone(),
            }) as Box<dyn Learner>
        })
        .collect();
    (learners, logs)
}

fn small_pd(market: MarketConfig) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_env(EnvKind::PrisonersDilemma);
    c.n_episodes = 300;
    c.n_runs = 4;
    c.market = market;
    c
}

fn small_grid(env: EnvKind, market: MarketConfig) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(env, LearnerKind::Dqn);
    c.n_episodes = 3;
    c.steps_per_episode = 40;
    c.n_runs = 2;
    c.learner.batch_size = 8;
    c.market = market;
    c
}

#[test]
fn no_market_post_rewards_equal_raw() {
    for cfg in [small_pd(MarketConfig::none()), small_grid(EnvKind::Refinery, MarketConfig::none())] {
        let r = run_training(&cfg, 0).unwrap();
        assert_eq!(r.raw_returns, r.post_returns);
        assert_eq!(r.total_trades(), 0);
    }
}

#[test]
fn learners_are_trained_on_post_market_rewards() {
    // agent 0 cooperates and buys `D` from agent 1, agent 1 defects: the
    // defector pays 1.9 to the cooperator every round
    let cfg = small_pd(MarketConfig::action(-1.9));
    let (mut learners, logs) = scripted(&[3, 1], 6);
    let r = run_with_learners(&cfg, 0, &mut learners).unwrap();
    let seen0 = logs[0].lock().unwrap().clone();
    let seen1 = logs[1].lock().unwrap().clone();
    assert_eq!(seen0.len(), cfg.n_episodes);
    for e in 0..cfg.n_episodes {
        assert_eq!(r.raw_returns[e], vec![-1.0, 2.0]);
        assert_eq!(seen0[e], r.post_returns[e][0]);
        assert_eq!(seen1[e], r.post_returns[e][1]);
        assert!((seen0[e] - 0.9).abs() < 1e-12 && (seen1[e] - 0.1).abs() < 1e-12);
        assert_eq!(r.trades[e], vec![1, 1]);
    }
}

#[test]
fn scripted_defection_yields_the_dd_total() {
    let mut cfg = small_pd(MarketConfig::none());
    cfg.pd = PdPayoffs::canonical();
    let (mut learners, _) = scripted(&[1, 1], 2);
    let r = run_with_learners(&cfg, 0, &mut learners).unwrap();
    assert!((0..r.n_episodes()).all(|e| r.overall_raw(e) == 2.0));
    assert!((0..r.n_episodes()).all(|e| r.normalized(e) == r.normalized(0)));
    let m = run_metrics(&r, true);
    assert_eq!(m.mutual_defection, Some(1.0));
    assert_eq!(m.mutual_cooperation, Some(0.0));
}

#[test]
fn learner_count_and_heads_are_checked() {
    let cfg = small_pd(MarketConfig::action(-1.9));
    let (mut one, _) = scripted(&[0], 6);
    assert!(run_with_learners(&cfg, 0, &mut one).is_err());
    let (mut narrow, _) = scripted(&[0, 0], 2);
    assert!(run_with_learners(&cfg, 0, &mut narrow).is_err());
}

#[test]
fn invalid_configs_fail_before_training() {
    let mut cfg = small_pd(MarketConfig::none());
    cfg.n_runs = 0;
    assert!(run_experiment(&cfg, 1).is_err());
    let mut cfg = small_pd(MarketConfig::none());
    cfg.n_agents = 3;
    assert!(run_training(&cfg, 0).is_err());
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    for cfg in [
        small_pd(MarketConfig::action(-1.9)),
        small_grid(EnvKind::Smartfactory, MarketConfig::shareholder(0.0, 1.0)),
    ] {
        let a = serde_json::to_string(&run_training(&cfg, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&run_training(&cfg, 1).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&run_training(&cfg, 2).unwrap()).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn ppo_runs_are_deterministic_too() {
    let mut cfg = small_grid(EnvKind::Refinery, MarketConfig::action(0.5));
    cfg.learner = LearnerParams::defaults(LearnerKind::Ppo);
    cfg.learner.update_period = 50;
    let a = run_training(&cfg, 0).unwrap();
    let b = run_training(&cfg, 0).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn series_lengths_match_budget() {
    let cfg = small_grid(EnvKind::Smartfactory, MarketConfig::none());
    let r = run_training(&cfg, 0).unwrap();
    assert_eq!(r.n_episodes(), cfg.n_episodes);
    for table in [&r.raw_returns, &r.post_returns, &r.liabilities] {
        assert_eq!(table.len(), cfg.n_episodes);
        assert!(table.iter().all(|row| row.len() == cfg.n_agents));
    }
    assert!(r.steps.iter().all(|&s| s >= 1 && s <= cfg.steps_per_episode));
    assert_eq!(r.final_balance.len(), cfg.n_agents * cfg.n_agents);
}

#[test]
fn market_runs_conserve_reward() {
    for (env, market) in [
        (EnvKind::Smartfactory, MarketConfig::shareholder(0.0, 1.0)),
        (EnvKind::Smartfactory, MarketConfig::action(1.0)),
        (EnvKind::Refinery, MarketConfig::shareholder(0.5, 0.25)),
    ] {
        let out = run_experiment(&small_grid(env, market), 1).unwrap();
        assert!(out.stats.max_conservation_error <= 1e-6);
    }
    let out = run_experiment(&small_pd(MarketConfig::action(-1.9)), 1).unwrap();
    assert!(out.stats.max_conservation_error <= 1e-6);
}

#[test]
fn single_run_stats_are_that_runs_metrics() {
    let mut cfg = small_pd(MarketConfig::none());
    cfg.n_runs = 1;
    let out = run_experiment(&cfg, 1).unwrap();
    let m = &out.metrics[0];
    assert_eq!(out.stats.n_runs, 1);
    assert_eq!(out.stats.normalized_return.mean, m.normalized_return);
    assert_eq!(out.stats.normalized_return.std, 0.0);
    assert_eq!(out.stats.overall_reward.mean, m.overall_reward);
}

#[test]
fn aggregation_ignores_run_order() {
    let out = run_experiment(&small_pd(MarketConfig::action(-1.9)), 2).unwrap();
    let mut reversed = out.metrics.clone();
    reversed.reverse();
    assert_eq!(aggregate(&reversed, vec![]), aggregate(&out.metrics, vec![]));
    assert_eq!(out.stats, aggregate(&out.metrics, vec![]));
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small_pd(MarketConfig::action(-1.9));
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 3).unwrap();
    assert_eq!(a.stats, b.stats);
}

#[test]
fn seed_ledger_reexecutes_single_runs() {
    let cfg = small_pd(MarketConfig::action(-1.9));
    let out = run_experiment(&cfg, 1).unwrap();
    let summary = summary_json(&cfg, &out.stats);
    let ledger = summary["seeds"].as_array().unwrap();
    assert_eq!(ledger.len(), cfg.n_runs);
    let restored = config_from_summary(&summary).unwrap();
    assert_eq!(restored, cfg);
    let entry = &ledger[2];
    let id = entry["run_id"].as_u64().unwrap() as usize;
    let alone = run_training(&restored, id).unwrap();
    assert_eq!(alone.seed, entry["seed"].as_u64().unwrap());
    assert_eq!(alone.post_returns, out.runs[id].post_returns);
}

#[test]
fn episode_csv_round_trip() {
    let cfg = small_grid(EnvKind::Refinery, MarketConfig::shareholder(0.0, 1.0));
    let out = run_experiment(&cfg, 1).unwrap();
    let mut buf = Vec::new();
    write_episode_csv(&mut buf, &out.runs).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert!(header.starts_with(
        "run_id,episode,agent,group,raw_return,post_market_return,trades_made,liabilities_outstanding"
    ));
    let rows = read_episode_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), cfg.n_runs * cfg.n_episodes * cfg.n_agents);
    let s = summarize_rows(&rows);
    assert_eq!((s.runs, s.episodes, s.agents), (cfg.n_runs, cfg.n_episodes, cfg.n_agents));
    assert!((s.raw_total - s.post_market_total).abs() < 1e-6);
}

#[test]
fn conflict_sweep_reports_the_frontier() {
    let mut cfg = ExperimentConfig::for_env(EnvKind::Conflict);
    cfg.n_episodes = 200;
    cfg.n_runs = 2;
    let rows = conflict_sweep(&[0.0, 1.5, 3.0], &cfg, 1).unwrap();
    let f: Vec<f64> = rows.iter().map(|r| r.frontier.unwrap()).collect();
    assert_eq!(f, vec![3.0, 1.5, 3.0]);
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, "alpha", &rows).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("alpha,mean,stddev,frontier"));
    assert!(conflict_sweep(&[0.0], &small_pd(MarketConfig::none()), 1).is_err());
}

fn metrics_with_shares(id: usize, shares: Option<(f64, f64)>) -> RunMetrics {
    RunMetrics {
        run_id: id,
        seed: id as u64,
        normalized_return: 0.0,
        overall_reward: 0.0,
        mutual_cooperation: None,
        mutual_defection: None,
        high_share: shares.map(|s| s.0),
        low_share: shares.map(|s| s.1),
        trades: 0,
        max_conservation_error: 0.0,
    }
}

#[test]
fn distribution_examples() {
    assert_eq!(reward_shares(4.0, 0.0), Some((1.0, 0.0)));
    assert_eq!(reward_shares(2.0, 2.0), Some((0.5, 0.5)));
    assert_eq!(reward_shares(0.0, 0.0), None);
    assert_eq!(reward_shares(-3.0, 1.0), None);
    let analysis = distribution_analysis(&[
        (0.0, vec![metrics_with_shares(0, reward_shares(3.0, 1.0)), metrics_with_shares(1, None)]),
        (1.0, vec![metrics_with_shares(0, reward_shares(1.0, 1.0))]),
    ]);
    assert_eq!(analysis.points.len(), 2);
    assert_eq!(analysis.excluded, vec![(0.0, 1), (1.0, 0)]);
    for p in &analysis.points {
        assert!((p.high_share + p.low_share - 1.0).abs() < 1e-9);
    }
}

#[test]
fn grid_shares_sum_to_one() {
    let out = run_experiment(&small_grid(EnvKind::Smartfactory, MarketConfig::none()), 1).unwrap();
    for m in &out.metrics {
        if let (Some(h), Some(l)) = (m.high_share, m.low_share) {
            assert!((h + l - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn price_sweep_keeps_other_settings() {
    let mut cfg = small_grid(EnvKind::Smartfactory, MarketConfig::shareholder(0.0, 0.5));
    cfg.n_runs = 1;
    let out = price_sweep(&[0.0, 1.0], &cfg, 1).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[1].1.config.market.price, 1.0);
    assert_eq!(out[1].1.config.market.dividend, 0.5);
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_training, RunResult};
use super::stats::MeanStd;
use crate::env::matrix::{pareto_frontier, Move};
use crate::error::{Error, Result};

/// Share of the final episodes every summary metric averages over.
pub const FINAL_WINDOW: f64 = 0.25;

/// Fraction of final-window rounds a matrix-game run must spend in one
/// joint action to count as converged to it.
pub const CONVERGED_FRACTION: f64 = 0.95;

/// Summary of one run, all over the final window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: usize,
    pub seed: u64,
    pub normalized_return: f64,
    /// Mean summed raw reward per episode (per round in matrix games).
    pub overall_reward: f64,
    /// Matrix games only: fraction of rounds played `(C, C)` / `(D, D)`.
    pub mutual_cooperation: Option<f64>,
    pub mutual_defection: Option<f64>,
    /// Shares of the summed post-market return; `None` when it is not positive.
    pub high_share: Option<f64>,
    pub low_share: Option<f64>,
    pub trades: usize,
    pub max_conservation_error: f64,
}

/// `(high / total, low / total)`, or `None` unless `total > 0`.
pub fn reward_shares(high: f64, low: f64) -> Option<(f64, f64)> {
    let total = high + low;
    (total > 0.0).then(|| (high / total, low / total))
}

pub fn run_metrics(result: &RunResult, matrix: bool) -> RunMetrics {
    let window = result.final_window(FINAL_WINDOW);
    let len = window.len() as f64;
    let normalized_return = window.clone().map(|e| result.normalized(e)).sum::<f64>() / len;
    let overall_reward = window.clone().map(|e| result.overall_raw(e)).sum::<f64>() / len;
    let rate = |a: usize| {
        window
            .clone()
            .filter(|&e| result.last_env_actions[e].iter().all(|&x| x == a))
            .count() as f64
            / len
    };
    let (mutual_cooperation, mutual_defection) = if matrix {
        (Some(rate(Move::C.index())), Some(rate(Move::D.index())))
    } else {
        (None, None)
    };
    let (mut high, mut low) = (0.0, 0.0);
    for e in window {
        for (g, r) in result.groups[e].iter().zip(&result.post_returns[e]) {
            if g.is_high_tier() {
                high += r;
            } else {
                low += r;
            }
        }
    }
    let shares = reward_shares(high, low);
    RunMetrics {
        run_id: result.run_id,
        seed: result.seed,
        normalized_return,
        overall_reward,
        mutual_cooperation,
        mutual_defection,
        high_share: shares.map(|s| s.0),
        low_share: shares.map(|s| s.1),
        trades: result.total_trades(),
        max_conservation_error: result.conservation_error(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub run_id: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_runs: usize,
    pub normalized_return: MeanStd,
    pub overall_reward: MeanStd,
    pub mutual_cooperation: Option<MeanStd>,
    pub mutual_defection: Option<MeanStd>,
    /// Runs spending at least [`CONVERGED_FRACTION`] of the window in `(C, C)` / `(D, D)`.
    pub converged_cooperation: Option<f64>,
    pub converged_defection: Option<f64>,
    pub high_share: Option<MeanStd>,
    pub low_share: Option<MeanStd>,
    /// Runs whose total post-market return was not positive.
    pub zero_total_runs: usize,
    pub trades: MeanStd,
    pub max_conservation_error: f64,
    pub seeds: Vec<SeedEntry>,
    pub failed_runs: Vec<(usize, String)>,
}

/// Pure fold over run metrics; sorted by run id first so the result does
/// not depend on completion order.
pub fn aggregate(metrics: &[RunMetrics], failed_runs: Vec<(usize, String)>) -> AggregateStats {
    let mut m: Vec<&RunMetrics> = metrics.iter().collect();
    m.sort_by_key(|r| r.run_id);
    let col = |f: &dyn Fn(&RunMetrics) -> f64| MeanStd::of(&m.iter().map(|r| f(r)).collect::<Vec<_>>());
    let opt_col = |f: &dyn Fn(&RunMetrics) -> Option<f64>| {
        let v: Vec<f64> = m.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| MeanStd::of(&v))
    };
    let frac = |f: &dyn Fn(&RunMetrics) -> Option<f64>| {
        let v: Vec<f64> = m.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| v.iter().filter(|&&x| x >= CONVERGED_FRACTION).count() as f64 / v.len() as f64)
    };
    let mut failed_runs = failed_runs;
    failed_runs.sort();
    AggregateStats {
        n_runs: m.len(),
        normalized_return: col(&|r| r.normalized_return),
        overall_reward: col(&|r| r.overall_reward),
        mutual_cooperation: opt_col(&|r| r.mutual_cooperation),
        mutual_defection: opt_col(&|r| r.mutual_defection),
        converged_cooperation: frac(&|r| r.mutual_cooperation),
        converged_defection: frac(&|r| r.mutual_defection),
        high_share: opt_col(&|r| r.high_share),
        low_share: opt_col(&|r| r.low_share),
        zero_total_runs: m.iter().filter(|r| r.high_share.is_none()).count(),
        trades: col(&|r| r.trades as f64),
        max_conservation_error: m.iter().map(|r| r.max_conservation_error).fold(0.0, f64::max),
        seeds: m
            .iter()
            .map(|r| SeedEntry {
                run_id: r.run_id,
                seed: r.seed,
            })
            .collect(),
        failed_runs,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Successful runs in run-id order.
    pub runs: Vec<RunResult>,
    pub metrics: Vec<RunMetrics>,
    pub stats: AggregateStats,
}

/// Runs `config.n_runs` independent trainings on up to `jobs` threads.
/// Failed runs are listed in the stats; the call fails only if every run does.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(usize, Result<RunResult>)> = pool.install(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|id| (id, run_training(config, id)))
            .collect()
    });
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(r) => runs.push(r),
            Err(e) => failed.push((id, e.to_string())),
        }
    }
    if runs.is_empty() {
        let first = failed.first().map(|f| f.1.clone()).unwrap_or_default();
        return Err(Error::Config(format!("all runs failed: {first}")));
    }
    runs.sort_by_key(|r| r.run_id);
    let matrix = config.env.is_matrix();
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| run_metrics(r, matrix)).collect();
    let stats = aggregate(&metrics, failed);
    Ok(ExperimentOutput {
        config: config.clone(),
        runs,
        metrics,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// The swept value (alpha, or a price).
    pub param: f64,
    pub mean: f64,
    pub stddev: f64,
    /// Best achievable total for this alpha; `None` for price sweeps.
    pub frontier: Option<f64>,
}

/// Conflict-game sweep: per alpha, the mean per-round overall reward over
/// the final window next to the frontier.
pub fn conflict_sweep(alphas: &[f64], base: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    if base.env != super::config::EnvKind::Conflict {
        return Err(Error::Config("conflict_sweep needs env = conflict".into()));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let mut cfg = base.clone();
            cfg.conflict.alpha = alpha;
            let out = run_experiment(&cfg, jobs)?;
            Ok(SweepRow {
                param: alpha,
                mean: out.stats.overall_reward.mean,
                stddev: out.stats.overall_reward.std,
                frontier: Some(pareto_frontier(&cfg.conflict)),
            })
        })
        .collect()
}

/// Runs `base` once per price level. Shareholder markets keep their dividend.
pub fn price_sweep(prices: &[f64], base: &ExperimentConfig, jobs: usize) -> Result<Vec<(f64, ExperimentOutput)>> {
    prices
        .iter()
        .map(|&p| {
            let mut cfg = base.clone();
            cfg.market.price = p;
            Ok((p, run_experiment(&cfg, jobs)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionPoint {
    pub price: f64,
    pub run_id: usize,
    pub high_share: f64,
    pub low_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionAnalysis {
    pub points: Vec<DistributionPoint>,
    /// `(price, runs)` excluded because their total was not positive.
    pub excluded: Vec<(f64, usize)>,
}

/// One scatter point per run and price: the shares of the summed
/// post-market return going to high-tier and low-tier agents.
pub fn distribution_analysis(results: &[(f64, Vec<RunMetrics>)]) -> DistributionAnalysis {
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (price, metrics) in results {
        let mut skipped = 0;
        for m in metrics {
            match (m.high_share, m.low_share) {
                (Some(h), Some(l)) => points.push(DistributionPoint {
                    price: *price,
                    run_id: m.run_id,
                    high_share: h,
                    low_share: l,
                }),
                _ => skipped += 1,
            }
        }
        excluded.push((*price, skipped));
    }
    DistributionAnalysis { points, excluded }
}

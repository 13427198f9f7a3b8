//! Training loop, multi-run experiments, sweeps and result files.

mod config;
mod experiment;
mod output;
mod run;
mod stats;

pub use config::{EnvKind, ExperimentConfig, LearnerParams};
pub use experiment::{
    aggregate, conflict_sweep, distribution_analysis, price_sweep, reward_shares, run_experiment, run_metrics,
    AggregateStats, DistributionAnalysis, DistributionPoint, ExperimentOutput, RunMetrics, SeedEntry, SweepRow,
    CONVERGED_FRACTION, FINAL_WINDOW,
};
pub use output::{
    config_from_summary, episode_rows, read_episode_csv, summarize_rows, summary_json, write_distribution_csv,
    write_episode_csv, write_sweep_csv, CsvSummary, EpisodeRow, GroupSummary,
};
pub use run::{build_learners, run_training, run_with_learners, RunResult};
pub use stats::{rank_sum_test, MeanStd, RankTest};

/// Trailing moving average; the first values average what is available.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let w = width.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if i >= w {
            acc -= values[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

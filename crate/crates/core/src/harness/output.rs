//! CSV and JSON result files.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{AggregateStats, DistributionAnalysis, SweepRow};
use super::run::RunResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub run_id: usize,
    pub episode: usize,
    pub agent: usize,
    pub group: String,
    pub raw_return: f64,
    pub post_market_return: f64,
    pub trades_made: usize,
    pub liabilities_outstanding: f64,
}

pub fn episode_rows(run: &RunResult) -> impl Iterator<Item = EpisodeRow> + '_ {
    (0..run.n_episodes()).flat_map(move |e| {
        (0..run.n_agents).map(move |i| EpisodeRow {
            run_id: run.run_id,
            episode: e,
            agent: i,
            group: run.groups[e][i].label(),
            raw_return: run.raw_returns[e][i],
            post_market_return: run.post_returns[e][i],
            trades_made: run.trades[e][i],
            liabilities_outstanding: run.liabilities[e][i],
        })
    })
}

/// One row per episode per agent, runs in the given order.
pub fn write_episode_csv<W: Write>(w: W, runs: &[RunResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for run in runs {
        for row in episode_rows(run) {
            out.serialize(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_episode_csv<R: Read>(r: R) -> Result<Vec<EpisodeRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Summary JSON: the config echo (reparseable), aggregate metrics and the
/// seed ledger.
pub fn summary_json(config: &ExperimentConfig, stats: &AggregateStats) -> serde_json::Value {
    serde_json::json!({
        "config": config.echo(),
        "stats": stats,
        "seeds": stats.seeds,
    })
}

pub fn config_from_summary(summary: &serde_json::Value) -> Result<ExperimentConfig> {
    let text = summary
        .get("config")
        .and_then(|c| c.as_str())
        .ok_or_else(|| Error::Config("summary has no config echo".into()))?;
    ExperimentConfig::parse(text)
}

pub fn write_sweep_csv<W: Write>(w: W, param: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([param, "mean", "stddev", "frontier"])?;
    for r in rows {
        out.write_record([
            r.param.to_string(),
            r.mean.to_string(),
            r.stddev.to_string(),
            r.frontier.map_or_else(String::new, |f| f.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_distribution_csv<W: Write>(w: W, analysis: &DistributionAnalysis) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &analysis.points {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-group totals of an episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub rows: usize,
    pub mean_raw_return: f64,
    pub mean_post_market_return: f64,
    pub trades_made: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvSummary {
    pub runs: usize,
    pub episodes: usize,
    pub agents: usize,
    pub groups: Vec<GroupSummary>,
    pub raw_total: f64,
    pub post_market_total: f64,
}

pub fn summarize_rows(rows: &[EpisodeRow]) -> CsvSummary {
    let mut runs = std::collections::BTreeSet::new();
    let mut episodes = 0;
    let mut agents = 0;
    let mut groups: BTreeMap<String, (usize, f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        runs.insert(r.run_id);
        episodes = episodes.max(r.episode + 1);
        agents = agents.max(r.agent + 1);
        let g = groups.entry(r.group.clone()).or_default();
        g.0 += 1;
        g.1 += r.raw_return;
        g.2 += r.post_market_return;
        g.3 += r.trades_made;
    }
    CsvSummary {
        runs: runs.len(),
        episodes,
        agents,
        raw_total: rows.iter().map(|r| r.raw_return).sum(),
        post_market_total: rows.iter().map(|r| r.post_market_return).sum(),
        groups: groups
            .into_iter()
            .map(|(group, (n, raw, post, trades))| GroupSummary {
                group,
                rows: n,
                mean_raw_return: raw / n as f64,
                mean_post_market_return: post / n as f64,
                trades_made: trades,
            })
            .collect(),
    }
}

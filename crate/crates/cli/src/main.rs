//! `smg`: run stochastic market game experiments from the command line.
//!
//! Exit codes: 0 on success, 1 on usage or config errors, 2 when an
//! experiment fails at runtime.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use smg_core::harness::{
    conflict_sweep, distribution_analysis, moving_average, price_sweep, read_episode_csv, run_experiment,
    summarize_rows, summary_json, write_distribution_csv, write_episode_csv, write_sweep_csv, EnvKind,
    ExperimentConfig, ExperimentOutput, SweepRow,
};

#[derive(Parser, Debug)]
#[command(name = "smg", version, about = "Stochastic market game experiments", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment configuration.
    Run(RunArgs),
    /// Conflict-game sweep over alpha next to the Pareto frontier.
    SweepAlpha(SweepAlphaArgs),
    /// Reward distribution between priority groups over a list of prices.
    SweepPrice(SweepPriceArgs),
    /// Iterated Prisoner's Dilemma, with or without market.
    Pd(ExpArgs),
    /// Summarize an episode CSV written by `run` or `pd`.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ExpArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment: pd, conflict, smartfactory, refinery.
    #[arg(long)]
    env: Option<String>,
    /// Learner: tabular, dqn, ppo. Defaults to tabular for matrix games, dqn otherwise.
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    /// Episodes per run.
    #[arg(long)]
    episodes: Option<usize>,
    /// Rounds per run for matrix games, steps per episode for gridworlds.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; falls back to SMG_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Market: none, action, shareholder.
    #[arg(long)]
    market: Option<String>,
    /// Signed trade price.
    #[arg(long, allow_hyphen_values = true)]
    price: Option<f64>,
    /// Per-step shareholder dividend.
    #[arg(long)]
    dividend: Option<f64>,
    /// Settle liabilities even when the debtor cannot cover them.
    #[arg(long)]
    allow_debt: bool,
    /// Any config key, as `key=value`. Repeatable; applied after the other flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory, created if missing. Without it results go to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args, Debug)]
struct SweepAlphaArgs {
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "0:3:0.25")]
    alphas: String,
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args, Debug)]
struct SweepPriceArgs {
    /// `start:stop:step` or a comma list; negative values allowed.
    #[arg(long, allow_hyphen_values = true)]
    prices: String,
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Episode CSV file.
    path: PathBuf,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Parses `start:stop:step` (inclusive, tolerant to rounding) or `a,b,c`.
fn parse_values(text: &str) -> anyhow::Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number `{p}` in `{text}`")))
            .collect::<anyhow::Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            bail!("range `{text}` must be start:stop:step");
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("range `{text}` needs step > 0 and stop >= start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| start + k as f64 * step).collect())
    } else {
        let v: Vec<f64> = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number `{p}`")))
            .collect::<anyhow::Result<_>>()?;
        if v.is_empty() {
            bail!("empty value list");
        }
        Ok(v)
    }
}

fn config_key(line: &str) -> Option<&str> {
    let line = line.split('#').next()?.trim();
    line.split_once('=').map(|(k, _)| k.trim())
}

/// Config file lines followed by flag overrides, as one `key = value` text.
/// `forced_env` pins the environment for subcommands that only make sense
/// for one game.
fn build_config(args: &ExpArgs, forced_env: Option<EnvKind>) -> Result<ExperimentConfig, Failure> {
    let file = match &args.config {
        Some(p) => fs::read_to_string(p)
            .with_context(|| format!("reading config {}", p.display()))
            .map_err(config_err)?,
        None => String::new(),
    };
    let env = match (forced_env, &args.env) {
        (Some(f), Some(e)) => {
            let e: EnvKind = e.parse().map_err(config_err)?;
            if e != f {
                return Err(config_err(anyhow!("this subcommand runs env {}", f.as_str())));
            }
            Some(f)
        }
        (Some(f), None) => Some(f),
        (None, Some(e)) => Some(e.parse::<EnvKind>().map_err(config_err)?),
        (None, None) => None,
    };
    let file_env = file
        .lines()
        .filter(|l| config_key(l) == Some("env"))
        .filter_map(|l| l.split('#').next()?.split_once('=').map(|(_, v)| v.trim().to_string()))
        .next_back();
    let env = match (env, file_env) {
        (Some(e), _) => e,
        (None, Some(f)) => f.parse().map_err(config_err)?,
        (None, None) => return Err(config_err(anyhow!("no environment given: use --env or a config file"))),
    };

    let mut lines: Vec<String> = Vec::new();
    for line in file.lines() {
        match config_key(line) {
            Some("env") => continue,
            Some("learner" | "learner.kind") if args.learner.is_some() => continue,
            _ => lines.push(line.to_string()),
        }
    }
    let mut push = |k: &str, v: String| lines.push(format!("{k} = {v}"));
    push("env", env.as_str().to_string());
    if let Some(l) = &args.learner {
        push("learner.kind", l.clone());
    }
    if let Some(n) = args.agents {
        push("n_agents", n.to_string());
    }
    if let Some(n) = args.episodes {
        push("n_episodes", n.to_string());
    }
    if let Some(n) = args.steps {
        if env.is_matrix() {
            push("n_episodes", n.to_string());
        } else {
            push("steps_per_episode", n.to_string());
        }
    }
    if let Some(n) = args.runs {
        push("n_runs", n.to_string());
    }
    let seed = match args.seed {
        Some(s) => Some(s),
        None => match std::env::var("SMG_SEED") {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .with_context(|| format!("SMG_SEED `{s}` is not an unsigned integer"))
                    .map_err(config_err)?,
            ),
            Err(_) => None,
        },
    };
    if let Some(s) = seed {
        push("master_seed", s.to_string());
    }
    if let Some(m) = &args.market {
        push("market.kind", m.clone());
    }
    if let Some(p) = args.price {
        push("market.price", p.to_string());
    }
    if let Some(d) = args.dividend {
        push("market.dividend", d.to_string());
    }
    if args.allow_debt {
        push("market.allow_debt", "true".into());
    }
    if let Some(out) = &args.out {
        push("output", out.display().to_string());
    }
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| config_err(anyhow!("--set expects key=value, got `{s}`")))?;
        push(k.trim(), v.trim().to_string());
    }
    let cfg = ExperimentConfig::parse(&lines.join("\n")).map_err(config_err)?;
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn jobs(args: &ExpArgs) -> usize {
    args.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Output directory with the files about to be written checked for
/// clobbering up front, so a refused run writes nothing.
struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn prepare(cfg: &ExperimentConfig, force: bool, files: &[&str]) -> Result<Option<Self>, Failure> {
        let Some(dir) = cfg.output.as_ref().map(PathBuf::from) else {
            return Ok(None);
        };
        if !force {
            let existing: Vec<String> = files
                .iter()
                .map(|f| dir.join(f))
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !existing.is_empty() {
                return Err(config_err(anyhow!(
                    "refusing to overwrite {} (use --force)",
                    existing.join(", ")
                )));
            }
        }
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime_err)?;
        Ok(Some(Self { dir }))
    }

    fn create(&self, name: &str) -> Result<fs::File, Failure> {
        let p = self.dir.join(name);
        fs::File::create(&p)
            .with_context(|| format!("creating {}", p.display()))
            .map_err(runtime_err)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value).map_err(runtime_err)?;
        writeln!(f).map_err(runtime_err)
    }
}

fn print_json(value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    // a closed pipe (`smg inspect f | head`) is not an error
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput, Failure> {
    run_experiment(cfg, jobs).map_err(runtime_err)
}

fn cmd_run(args: &ExpArgs, forced: Option<EnvKind>) -> Result<(), Failure> {
    let cfg = build_config(args, forced)?;
    let matrix = cfg.env.is_matrix();
    let mut files = vec!["episodes.csv", "summary.json"];
    if matrix {
        files.push("curve.csv");
    }
    let out_dir = OutDir::prepare(&cfg, args.force, &files)?;
    let out = experiment(&cfg, jobs(args))?;
    let summary = summary_json(&cfg, &out.stats);
    if let Some(dir) = &out_dir {
        write_episode_csv(dir.create("episodes.csv")?, &out.runs).map_err(runtime_err)?;
        dir.write_json("summary.json", &summary)?;
        if matrix {
            write_curve(dir.create("curve.csv")?, &out).map_err(runtime_err)?;
        }
    }
    print_json(&summary["stats"]);
    Ok(())
}

/// Per-round overall reward averaged over runs, with a 100-round moving
/// average for plotting.
fn write_curve(mut w: impl Write, out: &ExperimentOutput) -> anyhow::Result<()> {
    let n = out.runs.iter().map(|r| r.n_episodes()).min().unwrap_or(0);
    let mean: Vec<f64> = (0..n)
        .map(|e| out.runs.iter().map(|r| r.overall_raw(e)).sum::<f64>() / out.runs.len() as f64)
        .collect();
    let norm: Vec<f64> = (0..n)
        .map(|e| out.runs.iter().map(|r| r.normalized(e)).sum::<f64>() / out.runs.len() as f64)
        .collect();
    let smooth = moving_average(&mean, 100);
    let smooth_norm = moving_average(&norm, 100);
    writeln!(w, "round,overall_reward,overall_reward_ma100,normalized,normalized_ma100")?;
    for e in 0..n {
        writeln!(w, "{e},{},{},{},{}", mean[e], smooth[e], norm[e], smooth_norm[e])?;
    }
    Ok(())
}

fn cmd_sweep_alpha(args: &SweepAlphaArgs) -> Result<(), Failure> {
    let alphas = parse_values(&args.alphas).map_err(config_err)?;
    let cfg = build_config(&args.exp, Some(EnvKind::Conflict))?;
    let out_dir = OutDir::prepare(&cfg, args.exp.force, &["sweep.csv", "summary.json"])?;
    let rows = conflict_sweep(&alphas, &cfg, jobs(&args.exp)).map_err(runtime_err)?;
    if let Some(dir) = &out_dir {
        write_sweep_csv(dir.create("sweep.csv")?, "alpha", &rows).map_err(runtime_err)?;
        dir.write_json(
            "summary.json",
            &serde_json::json!({ "config": cfg.echo(), "alphas": alphas, "rows": rows }),
        )?;
    }
    write_sweep_csv(std::io::stdout().lock(), "alpha", &rows).map_err(runtime_err)
}

fn cmd_sweep_price(args: &SweepPriceArgs) -> Result<(), Failure> {
    let prices = parse_values(&args.prices).map_err(config_err)?;
    let cfg = build_config(&args.exp, None)?;
    if cfg.market.kind == smg_core::MarketKind::None {
        return Err(config_err(anyhow!("sweep-price needs --market action or shareholder")));
    }
    let files = ["prices.csv", "distribution.csv", "summary.json"];
    let out_dir = OutDir::prepare(&cfg, args.exp.force, &files)?;
    let results = price_sweep(&prices, &cfg, jobs(&args.exp)).map_err(runtime_err)?;
    let rows: Vec<SweepRow> = results
        .iter()
        .map(|(p, o)| SweepRow {
            param: *p,
            mean: o.stats.normalized_return.mean,
            stddev: o.stats.normalized_return.std,
            frontier: None,
        })
        .collect();
    let per_price: Vec<(f64, Vec<_>)> = results.iter().map(|(p, o)| (*p, o.metrics.clone())).collect();
    let analysis = distribution_analysis(&per_price);
    if let Some(dir) = &out_dir {
        write_sweep_csv(dir.create("prices.csv")?, "price", &rows).map_err(runtime_err)?;
        write_distribution_csv(dir.create("distribution.csv")?, &analysis).map_err(runtime_err)?;
        let stats: Vec<_> = results
            .iter()
            .map(|(p, o)| serde_json::json!({ "price": p, "stats": o.stats }))
            .collect();
        dir.write_json(
            "summary.json",
            &serde_json::json!({ "config": cfg.echo(), "prices": stats, "excluded": analysis.excluded }),
        )?;
    }
    write_sweep_csv(std::io::stdout().lock(), "price", &rows).map_err(runtime_err)
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.path)
        .with_context(|| format!("opening {}", args.path.display()))
        .map_err(config_err)?;
    let rows = read_episode_csv(file).map_err(runtime_err)?;
    if rows.is_empty() {
        return Err(runtime_err(anyhow!("{} has no rows", args.path.display())));
    }
    print_json(&serde_json::to_value(summarize_rows(&rows)).map_err(runtime_err)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(a) => cmd_run(&a.exp, None),
        Command::Pd(a) => cmd_run(a, Some(EnvKind::PrisonersDilemma)),
        Command::SweepAlpha(a) => cmd_sweep_alpha(a),
        Command::SweepPrice(a) => cmd_sweep_price(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

//! Python bindings: market configs and steps, action spaces, environments
//! and the experiment harness. Structured results come back as plain
//! dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use smg_core::env::matrix::pareto_frontier as core_frontier;
use smg_core::env::{ConflictParams, MarketEnv};
use smg_core::game::env_rng;
use smg_core::harness::{self, EnvKind, ExperimentConfig};
use smg_core::learners::LearnerKind;
use smg_core::market::{self, DecodedAction, MarketAction, MarketActionIndex, ShareOp};
use smg_core::{AgentId, Environment, SmgRng};

/// Post-market rewards and `(seller, buyer)` trades.
type StepOutput = (Vec<f64>, Vec<(usize, usize)>);

fn py_err(e: smg_core::Error) -> PyErr {
    match e {
        smg_core::Error::Config(_)
        | smg_core::Error::InvalidAction { .. }
        | smg_core::Error::MarketIndexOutOfRange { .. }
        | smg_core::Error::DimensionMismatch { .. }
        | smg_core::Error::GridTooSmall { .. }
        | smg_core::Error::UnsupportedMarket(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Converts through JSON so nested results arrive as dicts and lists.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn decoded_tuple(d: &DecodedAction) -> (usize, String, Option<usize>, Option<usize>) {
    match d.market {
        MarketAction::NoOp => (d.env.0, "none".into(), None, None),
        MarketAction::Offer { target, action } => (d.env.0, "offer".into(), Some(target.0), Some(action.0)),
        MarketAction::Share { op, target } => {
            let op = match op {
                ShareOp::Buy => "buy",
                ShareOp::Sell => "sell",
            };
            (d.env.0, op.into(), Some(target.0), None)
        }
    }
}

#[pyclass(name = "MarketConfig", module = "smg", skip_from_py_object)]
#[derive(Clone)]
struct PyMarketConfig {
    inner: market::MarketConfig,
}

#[pymethods]
impl PyMarketConfig {
    #[new]
    #[pyo3(signature = (kind = "none", price = 0.0, dividend = 0.0, allow_debt = false))]
    fn new(kind: &str, price: f64, dividend: f64, allow_debt: bool) -> PyResult<Self> {
        let inner = market::MarketConfig {
            kind: kind.parse().map_err(py_err)?,
            price,
            dividend,
            allow_debt,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.as_str()
    }

    #[getter]
    fn price(&self) -> f64 {
        self.inner.price
    }

    #[getter]
    fn dividend(&self) -> f64 {
        self.inner.dividend
    }

    #[getter]
    fn allow_debt(&self) -> bool {
        self.inner.allow_debt
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketConfig(kind='{}', price={}, dividend={}, allow_debt={})",
            self.inner.kind.as_str(),
            self.inner.price,
            self.inner.dividend,
            if self.inner.allow_debt { "True" } else { "False" }
        )
    }
}

/// Balance sheet and share registry for one episode of market steps.
#[pyclass(name = "Market", module = "smg")]
struct PyMarket {
    inner: market::Market,
    n_agents: usize,
}

#[pymethods]
impl PyMarket {
    #[new]
    fn new(config: PyRef<'_, PyMarketConfig>, n_agents: usize, n_env_actions: usize) -> PyResult<Self> {
        if n_agents == 0 || n_env_actions == 0 {
            return Err(PyValueError::new_err("n_agents and n_env_actions must be positive"));
        }
        Ok(Self {
            inner: market::Market::new(config.inner, n_agents, n_env_actions),
            n_agents,
        })
    }

    #[getter]
    fn space_size(&self) -> usize {
        self.inner.space().size()
    }

    /// `(env_action, kind, target, offered_action)` for `agent`'s index.
    fn decode(&self, agent: usize, index: usize) -> PyResult<(usize, String, Option<usize>, Option<usize>)> {
        self.check_agent(agent)?;
        let d = self
            .inner
            .space()
            .decode(AgentId(agent), MarketActionIndex(index))
            .map_err(py_err)?;
        Ok(decoded_tuple(&d))
    }

    /// Redistributes `rewards` for one step of market-action indices.
    /// Returns the new rewards and the `(seller, buyer)` trades.
    fn step(&mut self, actions: Vec<usize>, rewards: Vec<f64>) -> PyResult<StepOutput> {
        if actions.len() != self.n_agents {
            return Err(PyValueError::new_err(format!("expected {} actions", self.n_agents)));
        }
        let joint = actions
            .iter()
            .enumerate()
            .map(|(i, &k)| self.inner.space().decode(AgentId(i), MarketActionIndex(k)))
            .collect::<smg_core::Result<Vec<_>>>()
            .map_err(py_err)?;
        let mut r = rewards;
        let trades = self.inner.step(&joint, &mut r).map_err(py_err)?;
        Ok((r, trades.pairs().collect()))
    }

    fn reset(&mut self) {
        self.inner.reset();
    }

    /// Outstanding liabilities, `balance[debtor][creditor]`.
    fn balance(&self) -> Vec<Vec<f64>> {
        let b = self.inner.balance();
        (0..self.n_agents)
            .map(|i| (0..self.n_agents).map(|j| b.liability(i, j)).collect())
            .collect()
    }

    /// `shares[holder][issuer]`.
    fn shares(&self) -> Vec<Vec<bool>> {
        let s = self.inner.shares();
        (0..self.n_agents)
            .map(|i| (0..self.n_agents).map(|j| s.holds(i, j)).collect())
            .collect()
    }
}

impl PyMarket {
    fn check_agent(&self, agent: usize) -> PyResult<()> {
        if agent >= self.n_agents {
            return Err(PyValueError::new_err(format!("agent {agent} out of range")));
        }
        Ok(())
    }
}

#[pyclass(name = "ExperimentConfig", module = "smg", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Preset for `env` (pd, conflict, smartfactory, refinery) and an
    /// optional learner (tabular, dqn, ppo).
    #[new]
    #[pyo3(signature = (env, learner = None))]
    fn new(env: &str, learner: Option<&str>) -> PyResult<Self> {
        let env: EnvKind = env.parse().map_err(py_err)?;
        let kind = match learner {
            Some(l) => l.parse::<LearnerKind>().map_err(py_err)?,
            None => ExperimentConfig::default_learner(env),
        };
        Ok(Self {
            inner: ExperimentConfig::preset(env, kind),
        })
    }

    /// Parses `key = value` text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::parse(text).map_err(py_err)?,
        })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = if let Ok(b) = value.extract::<bool>() {
            b.to_string()
        } else {
            value.str()?.to_string()
        };
        self.inner.set(key, &text).map_err(py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    fn echo(&self) -> String {
        self.inner.echo()
    }

    #[getter]
    fn env(&self) -> &'static str {
        self.inner.env.as_str()
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents
    }

    #[getter]
    fn n_runs(&self) -> usize {
        self.inner.n_runs
    }

    #[getter]
    fn n_episodes(&self) -> usize {
        self.inner.n_episodes
    }

    #[getter]
    fn market(&self) -> PyMarketConfig {
        PyMarketConfig {
            inner: self.inner.market,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(env='{}', learner='{}', market='{}', n_runs={})",
            self.inner.env.as_str(),
            self.inner.learner.kind.as_str(),
            self.inner.market.kind.as_str(),
            self.inner.n_runs
        )
    }
}

/// An environment with its market, stepped with market-action indices.
#[pyclass(name = "Environment", module = "smg", unsendable)]
struct PyEnvironment {
    inner: MarketEnv<Box<dyn Environment>>,
    rng: SmgRng,
}

#[pymethods]
impl PyEnvironment {
    #[new]
    #[pyo3(signature = (config, seed = 0))]
    fn new(config: PyRef<'_, PyConfig>, seed: u64) -> PyResult<Self> {
        config.inner.validate().map_err(py_err)?;
        let env = config.inner.build_env().map_err(py_err)?;
        let mut rng = env_rng(seed);
        let mut inner = MarketEnv::new(env, config.inner.market);
        inner.reset(&mut rng);
        Ok(Self { inner, rng })
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.space().size()
    }

    #[getter]
    fn observation_len(&self) -> usize {
        self.inner.env().observation_len()
    }

    fn reset(&mut self) {
        self.inner.reset(&mut self.rng);
    }

    fn observe(&self, agent: usize) -> PyResult<Vec<f64>> {
        if agent >= self.inner.n_agents() {
            return Err(PyValueError::new_err(format!("agent {agent} out of range")));
        }
        Ok(self.inner.observe(AgentId(agent)).features)
    }

    /// Returns a dict with `raw`, `rewards`, `trades` and `done`.
    fn step(&mut self, py: Python<'_>, actions: Vec<usize>) -> PyResult<Py<PyAny>> {
        let idx: Vec<MarketActionIndex> = actions.into_iter().map(MarketActionIndex).collect();
        let out = self.inner.step_indices(&idx, &mut self.rng).map_err(py_err)?;
        #[derive(Serialize)]
        struct Step {
            raw: Vec<f64>,
            rewards: Vec<f64>,
            trades: Vec<(usize, usize)>,
            done: bool,
        }
        to_python(
            py,
            &Step {
                trades: out.trades.pairs().collect(),
                raw: out.raw,
                rewards: out.rewards,
                done: out.done,
            },
        )
    }

    fn render(&self) -> String {
        self.inner.env().render()
    }
}

#[pyfunction]
fn action_market_space_size(n_agents: usize, n_env_actions: usize) -> usize {
    market::action_market_space_size(n_agents, n_env_actions)
}

#[pyfunction]
fn shareholder_space_size(n_agents: usize, n_env_actions: usize) -> usize {
    market::shareholder_space_size(n_agents, n_env_actions)
}

/// Settles `balance[debtor][creditor]` against `rewards`; returns both.
#[pyfunction]
#[pyo3(signature = (rewards, balance, allow_debt = false))]
fn settle_balances(
    mut rewards: Vec<f64>,
    balance: Vec<Vec<f64>>,
    allow_debt: bool,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = balance.len();
    if balance.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("balance must be square"));
    }
    let mut sheet = market::BalanceSheet::from_rows(n, balance.concat()).map_err(py_err)?;
    market::settle_balances(&mut rewards, &mut sheet, allow_debt).map_err(py_err)?;
    let rows = sheet.to_rows().chunks(n.max(1)).map(<[f64]>::to_vec).collect();
    Ok((rewards, rows))
}

#[pyfunction]
#[pyo3(signature = (alpha, r1 = 0.375, r2 = 2.625))]
fn pareto_frontier(alpha: f64, r1: f64, r2: f64) -> f64 {
    core_frontier(&ConflictParams { r1, r2, alpha })
}

/// One training run; returns the recorded per-episode tables as a dict.
#[pyfunction]
#[pyo3(signature = (config, run_id = 0))]
fn run_training(py: Python<'_>, config: PyRef<'_, PyConfig>, run_id: usize) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let result = py.detach(|| harness::run_training(&cfg, run_id)).map_err(py_err)?;
    to_python(py, &result)
}

/// All runs of `config`; returns `{"stats": ..., "metrics": [...]}`.
#[pyfunction]
#[pyo3(signature = (config, jobs = 1))]
fn run_experiment(py: Python<'_>, config: PyRef<'_, PyConfig>, jobs: usize) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let out = py.detach(|| harness::run_experiment(&cfg, jobs)).map_err(py_err)?;
    to_python(py, &serde_json::json!({ "stats": out.stats, "metrics": out.metrics }))
}

/// Two-sided rank-sum test; returns `(u, z, p_value)`.
#[pyfunction]
fn rank_sum_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(PyValueError::new_err("both samples must be non-empty"));
    }
    let t = harness::rank_sum_test(&a, &b);
    Ok((t.u, t.z, t.p_value))
}

#[pymodule]
fn smg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarketConfig>()?;
    m.add_class::<PyMarket>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_function(wrap_pyfunction!(action_market_space_size, m)?)?;
    m.add_function(wrap_pyfunction!(shareholder_space_size, m)?)?;
    m.add_function(wrap_pyfunction!(settle_balances, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(rank_sum_test, m)?)?;
    Ok(())
}

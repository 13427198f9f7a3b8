//! Randomized settlement cases and exhaustive action-space checks.

use rand::Rng;
use smg_core::game::{env_rng, AgentId};
use smg_core::market::{
    action_market_space_size, settle_balances, shareholder_space_size, ActionSpace, BalanceSheet, MarketActionIndex,
    MarketKind,
};

#[derive(Debug, Default)]
pub struct SettlementReport {
    pub cases: usize,
    pub worst_conservation: f64,
    pub negative_entries: usize,
    pub grown_entries: usize,
    pub uncleared_debt_mode: usize,
}

pub fn settlement_cases(cases: usize, seed: u64) -> SettlementReport {
    let mut rng = env_rng(seed);
    let mut report = SettlementReport::default();
    for _ in 0..cases {
        let n = rng.random_range(1..=6);
        let allow_debt = rng.random_bool(0.5);
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(0.4) {
                    rows[i * n + j] = rng.random_range(0.0..5.0);
                }
            }
        }
        let mut balance = BalanceSheet::from_rows(n, rows.clone()).unwrap();
        let mut rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..10.0)).collect();
        let before: f64 = rewards.iter().sum();
        settle_balances(&mut rewards, &mut balance, allow_debt).unwrap();
        let after: f64 = rewards.iter().sum();
        report.cases += 1;
        report.worst_conservation = report.worst_conservation.max((after - before).abs());
        let out = balance.to_rows();
        report.negative_entries += out.iter().filter(|&&x| x < 0.0).count();
        report.grown_entries += out.iter().zip(&rows).filter(|(a, b)| a > b).count();
        if allow_debt && !balance.is_clear() {
            report.uncleared_debt_mode += 1;
        }
    }
    report
}

#[derive(Debug, Default)]
pub struct SpaceReport {
    pub spaces: usize,
    pub size_mismatches: usize,
    pub roundtrip_failures: usize,
}

/// Sizes against the closed forms and `encode(decode(k)) == k` for every
/// index, every agent, `N <= 4`, `|A^e| <= 6`.
pub fn action_space_sweep() -> SpaceReport {
    let mut report = SpaceReport::default();
    for n in 1..=4 {
        for n_env in 1..=6 {
            for kind in [MarketKind::ActionMarket, MarketKind::ShareholderMarket] {
                let space = ActionSpace::new(kind, n, n_env);
                let formula = match kind {
                    MarketKind::ActionMarket => n_env + (n - 1) * n_env * n_env,
                    _ => n_env * 2 * n,
                };
                let library = match kind {
                    MarketKind::ActionMarket => action_market_space_size(n, n_env),
                    _ => shareholder_space_size(n, n_env),
                };
                report.spaces += 1;
                if space.size() != formula || library != formula {
                    report.size_mismatches += 1;
                }
                for agent in 0..n {
                    let mut seen = std::collections::HashSet::new();
                    for k in 0..space.size() {
                        let ok = space
                            .decode(AgentId(agent), MarketActionIndex(k))
                            .and_then(|d| {
                                seen.insert(d);
                                space.encode(AgentId(agent), &d)
                            })
                            .map(|back| back.0 == k)
                            .unwrap_or(false);
                        if !ok {
                            report.roundtrip_failures += 1;
                        }
                    }
                    if seen.len() != space.size() || space.decode(AgentId(agent), MarketActionIndex(space.size())).is_ok() {
                        report.roundtrip_failures += 1;
                    }
                }
            }
        }
    }
    report
}

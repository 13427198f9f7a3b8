//! Brute-force market oracle: matches offers pair by pair from the decoded
//! joint action and moves reward directly, without offer matrices.

use smg_core::market::{
    market_step, BalanceSheet, DecodedAction, MarketAction, MarketConfig, MarketKind, ShareOp, ShareRegistry,
};

pub const REWARDS: [f64; 4] = [-1.0, 0.0, 1.0, 5.0];

/// Every decoded action available to `agent`.
pub fn all_actions(kind: MarketKind, agent: usize, n: usize, n_env: usize) -> Vec<DecodedAction> {
    let mut out = Vec::new();
    for e in 0..n_env {
        match kind {
            MarketKind::None => out.push(DecodedAction::plain(e)),
            MarketKind::ActionMarket => {
                out.push(DecodedAction::plain(e));
                for t in (0..n).filter(|&t| t != agent) {
                    for a in 0..n_env {
                        out.push(DecodedAction::offer(e, t, a));
                    }
                }
            }
            MarketKind::ShareholderMarket => {
                for op in [ShareOp::Buy, ShareOp::Sell] {
                    for t in 0..n {
                        out.push(DecodedAction::share(e, op, t));
                    }
                }
            }
        }
    }
    out
}

/// Cartesian product of per-agent choices, first agent varying slowest.
pub fn product<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                c.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x.clone());
                    p
                })
            })
            .collect();
    }
    out
}

pub struct OracleState {
    /// `owed[debtor][creditor]`
    pub owed: Vec<Vec<f64>>,
    /// `holds[holder][issuer]`
    pub holds: Vec<Vec<bool>>,
}

impl OracleState {
    pub fn new(n: usize) -> Self {
        Self {
            owed: vec![vec![0.0; n]; n],
            holds: vec![vec![false; n]; n],
        }
    }

    pub fn clear(&mut self) {
        self.owed.iter_mut().flatten().for_each(|x| *x = 0.0);
        self.holds.iter_mut().flatten().for_each(|x| *x = false);
    }
}

fn owe(state: &mut OracleState, buyer: usize, seller: usize, price: f64) {
    if price > 0.0 {
        state.owed[buyer][seller] += price;
    } else if price < 0.0 {
        state.owed[seller][buyer] += -price;
    }
}

/// One market step computed naively. Returns `(seller, buyer)` trades.
pub fn oracle_step(
    state: &mut OracleState,
    joint: &[DecodedAction],
    rewards: &mut [f64],
    config: &MarketConfig,
) -> Vec<(usize, usize)> {
    let n = joint.len();
    let mut trades = Vec::new();
    match config.kind {
        MarketKind::None => return trades,
        MarketKind::ActionMarket => {
            for seller in 0..n {
                for buyer in 0..n {
                    if let MarketAction::Offer { target, action } = joint[buyer].market {
                        if buyer != seller && target.0 == seller && joint[seller].env == action {
                            trades.push((seller, buyer));
                        }
                    }
                }
            }
            for &(s, b) in &trades {
                owe(state, b, s, config.price);
            }
        }
        MarketKind::ShareholderMarket => {
            for seller in 0..n {
                let selling = matches!(joint[seller].market, MarketAction::Share { op: ShareOp::Sell, .. });
                for buyer in 0..n {
                    let buying = matches!(
                        joint[buyer].market,
                        MarketAction::Share { op: ShareOp::Buy, target } if target.0 == seller
                    );
                    if selling && buying && buyer != seller {
                        trades.push((seller, buyer));
                    }
                }
            }
            for &(s, b) in &trades {
                if !state.holds[b][s] {
                    state.holds[b][s] = true;
                    owe(state, b, s, config.price);
                }
            }
            let start: Vec<f64> = rewards.to_vec();
            for issuer in 0..n {
                let mut left = start[issuer].max(0.0);
                for holder in 0..n {
                    if state.holds[holder][issuer] && left > 0.0 && config.dividend > 0.0 {
                        let d = config.dividend.min(left);
                        left -= d;
                        rewards[issuer] -= d;
                        rewards[holder] += d;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let l = state.owed[i][j];
            if l > 0.0 && (config.allow_debt || rewards[i] >= l) {
                rewards[i] -= l;
                rewards[j] += l;
                state.owed[i][j] = 0.0;
            }
        }
    }
    trades
}

pub fn market_configs(kind: MarketKind) -> Vec<MarketConfig> {
    let base: Vec<MarketConfig> = match kind {
        MarketKind::None => vec![MarketConfig::none()],
        MarketKind::ActionMarket => vec![MarketConfig::action(-1.9), MarketConfig::action(1.0)],
        MarketKind::ShareholderMarket => vec![
            MarketConfig::shareholder(0.0, 1.0),
            MarketConfig::shareholder(0.5, 0.25),
            MarketConfig::shareholder(-1.0, 5.0),
        ],
    };
    base.into_iter()
        .flat_map(|c| {
            [false, true].map(|allow_debt| MarketConfig { allow_debt, ..c })
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub cases: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<String>,
}

/// Fresh-state market steps for every joint action, reward vector and
/// config with `2 <= N <= 3` and `1 <= |A^e| <= 3`, compared bitwise.
pub fn exhaustive_oracle_check() -> OracleReport {
    let mut report = OracleReport::default();
    for kind in [MarketKind::None, MarketKind::ActionMarket, MarketKind::ShareholderMarket] {
        for n in 2..=3 {
            for n_env in 1..=3 {
                let per_agent: Vec<Vec<DecodedAction>> = (0..n).map(|i| all_actions(kind, i, n, n_env)).collect();
                let joints = product(&per_agent);
                let reward_sets = product(&vec![REWARDS.to_vec(); n]);
                let mut balance = BalanceSheet::new(n);
                let mut shares = ShareRegistry::new(n);
                let mut state = OracleState::new(n);
                let mut got = vec![0.0; n];
                let mut want = vec![0.0; n];
                for config in market_configs(kind) {
                    for joint in &joints {
                        for r in &reward_sets {
                            report.cases += 1;
                            got.copy_from_slice(r);
                            balance.clear();
                            shares.clear();
                            let trades = market_step(&mut balance, &mut shares, joint, &mut got, &config).unwrap();

                            want.copy_from_slice(r);
                            state.clear();
                            let want_trades = oracle_step(&mut state, joint, &mut want, &config);

                            let same = got == want
                                && trades.pairs().eq(want_trades.iter().copied())
                                && (0..n).all(|i| {
                                    (0..n).all(|j| {
                                        balance.liability(i, j) == state.owed[i][j]
                                            && shares.holds(i, j) == state.holds[i][j]
                                    })
                                });
                            if !same {
                                report.mismatches += 1;
                                if report.first_mismatch.is_none() {
                                    report.first_mismatch =
                                        Some(format!("{config:?} {joint:?} rewards {r:?}: got {got:?} want {want:?}"));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    report
}

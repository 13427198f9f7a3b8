use serde::{Deserialize, Serialize};

use super::matrix::SquareMatrix;
use crate::error::{Error, Result};

/// Outstanding liabilities: entry `(i, j)` is what agent `i` owes agent `j`.
/// Entries are non-negative and the diagonal stays zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet(SquareMatrix<f64>);

impl BalanceSheet {
    pub fn new(n_agents: usize) -> Self {
        Self(SquareMatrix::new(n_agents))
    }

    pub fn from_rows(n_agents: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != n_agents * n_agents {
            return Err(Error::DimensionMismatch {
                expected: n_agents * n_agents,
                actual: rows.len(),
            });
        }
        let mut sheet = Self::new(n_agents);
        for i in 0..n_agents {
            for j in 0..n_agents {
                let v = rows[i * n_agents + j];
                if i != j && v > 0.0 {
                    sheet.add_liability(i, j, v);
                }
            }
        }
        Ok(sheet)
    }

    pub fn n_agents(&self) -> usize {
        self.0.dim()
    }

    pub fn liability(&self, debtor: usize, creditor: usize) -> f64 {
        *self.0.get(debtor, creditor)
    }

    /// Adds `amount` owed by `debtor` to `creditor`. Non-positive amounts and
    /// self-liabilities are ignored.
    pub fn add_liability(&mut self, debtor: usize, creditor: usize, amount: f64) {
        if debtor != creditor && amount > 0.0 {
            *self.0.get_mut(debtor, creditor) += amount;
        }
    }

    pub fn clear(&mut self) {
        self.0.fill_default();
    }

    /// Total owed by `agent`.
    pub fn owed_by(&self, agent: usize) -> f64 {
        self.0.row(agent).iter().sum()
    }

    /// Total owed to `agent`.
    pub fn owed_to(&self, agent: usize) -> f64 {
        (0..self.n_agents()).map(|i| self.liability(i, agent)).sum()
    }

    pub fn total(&self) -> f64 {
        self.0.as_slice().iter().sum()
    }

    pub fn is_clear(&self) -> bool {
        self.0.as_slice().iter().all(|&v| v == 0.0)
    }

    /// Row-major dense copy, as written to run logs.
    pub fn to_rows(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }
}

/// Share holdings: `(i, j)` set means agent `i` holds a share of agent `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRegistry(SquareMatrix<bool>);

impl ShareRegistry {
    pub fn new(n_agents: usize) -> Self {
        Self(SquareMatrix::new(n_agents))
    }

    pub fn n_agents(&self) -> usize {
        self.0.dim()
    }

    pub fn holds(&self, holder: usize, issuer: usize) -> bool {
        *self.0.get(holder, issuer)
    }

    /// Records a share; returns `true` if it was not held before.
    pub fn grant(&mut self, holder: usize, issuer: usize) -> bool {
        if holder == issuer || self.holds(holder, issuer) {
            return false;
        }
        self.0.set(holder, issuer, true);
        true
    }

    pub fn clear(&mut self) {
        self.0.fill_default();
    }

    pub fn count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&h| h).count()
    }
}

/// Settles liabilities against this step's rewards.
///
/// Liabilities are visited once in ascending `(debtor, creditor)` order. A
/// liability is paid in full when debts are allowed or when the debtor's
/// current reward covers it; otherwise it stays on the sheet.
pub fn settle_balances(rewards: &mut [f64], balance: &mut BalanceSheet, allow_debt: bool) -> Result<()> {
    let n = balance.n_agents();
    if rewards.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rewards.len(),
        });
    }
    for i in 0..n {
        for j in 0..n {
            let owed = balance.liability(i, j);
            if owed <= 0.0 {
                continue;
            }
            if allow_debt || rewards[i] >= owed {
                rewards[i] -= owed;
                rewards[j] += owed;
                balance.0.set(i, j, 0.0);
            }
        }
    }
    Ok(())
}

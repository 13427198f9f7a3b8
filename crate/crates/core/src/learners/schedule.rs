use serde::{Deserialize, Serialize};

/// Linear per-step exploration decay from `start` to `end` over `horizon`
/// steps, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            horizon: 2000,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, horizon: u64) -> Self {
        Self { start, end, horizon }
    }

    pub fn value(&self, step: u64) -> f64 {
        if self.horizon == 0 || step >= self.horizon {
            return self.end;
        }
        let frac = step as f64 / self.horizon as f64;
        let v = self.start + (self.end - self.start) * frac;
        let (lo, hi) = if self.start <= self.end {
            (self.start, self.end)
        } else {
            (self.end, self.start)
        };
        v.clamp(lo, hi)
    }
}

use rand::Rng;

use crate::error::{Error, Result};

/// One stored transition `(s, a, r, s', done)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest entry is overwritten when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// Uniform sample with replacement.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Result<Vec<&'a Experience>> {
        if self.items.len() < batch || batch == 0 {
            return Err(Error::InsufficientReplay {
                available: self.items.len(),
                needed: batch.max(1),
            });
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub capacity: usize,
    /// Sampling probability is proportional to `priority^priority_exponent`.
    pub priority_exponent: f64,
    /// Exponent of the importance-sampling correction.
    pub importance_exponent: f64,
    /// Added to `|td error|` so no entry starves.
    pub priority_eps: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            capacity: 50_000,
            priority_exponent: 0.6,
            importance_exponent: 0.4,
            priority_eps: 1e-6,
        }
    }
}

/// Binary tree of partial sums over leaf weights.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`.
    fn find(&self, mut mass: f64, len: usize) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if mass < left {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        // Rounding can walk past the last filled leaf.
        (k - self.leaves).min(len - 1)
    }
}

/// A sampled minibatch: buffer slots and normalized importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Fixed-capacity FIFO buffer with proportional prioritized sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    cfg: ReplayConfig,
    items: Vec<T>,
    tree: SumTree,
    next: usize,
    max_priority: f64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(cfg: ReplayConfig) -> Result<Self> {
        if cfg.capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        if !(cfg.priority_eps > 0.0) {
            return Err(Error::Config("priority_eps must be positive".into()));
        }
        Ok(ReplayBuffer {
            cfg,
            items: Vec::new(),
            tree: SumTree::new(cfg.capacity),
            next: 0,
            max_priority: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cfg.capacity
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    /// Inserts at the highest priority seen so far, evicting the oldest
    /// entry when full. Returns the slot used.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        if self.items.len() < self.cfg.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.tree
            .set(slot, self.max_priority.powf(self.cfg.priority_exponent));
        self.next = (self.next + 1) % self.cfg.capacity;
        slot
    }

    /// Raw priority of a slot.
    pub fn priority(&self, i: usize) -> f64 {
        self.tree.get(i).powf(1.0 / self.cfg.priority_exponent)
    }

    /// Sampling probability of a slot.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    pub fn set_priority(&mut self, i: usize, priority: f64) {
        let p = priority.max(self.cfg.priority_eps);
        self.max_priority = self.max_priority.max(p);
        self.tree.set(i, p.powf(self.cfg.priority_exponent));
    }

    /// Priorities become `|td| + eps`.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, td) in indices.iter().zip(td_errors) {
            self.set_priority(i, td.abs() + self.cfg.priority_eps);
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mass = rng.gen::<f64>() * self.tree.total();
        self.tree.find(mass, self.items.len())
    }

    /// Stratified proportional sample of `batch` slots.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<SampledBatch> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::UnderfullBuffer {
                len: self.items.len(),
                batch,
            });
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let indices: Vec<usize> = (0..batch)
            .map(|k| {
                let mass = segment * (k as f64 + rng.gen::<f64>());
                self.tree.find(mass.min(total), self.items.len())
            })
            .collect();
        let n = self.items.len() as f64;
        let raw: Vec<f64> = indices
            .iter()
            .map(|&i| (n * self.probability(i)).powf(-self.cfg.importance_exponent))
            .collect();
        let max = raw.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        Ok(SampledBatch {
            indices,
            weights: raw.iter().map(|w| w / max).collect(),
        })
    }
}

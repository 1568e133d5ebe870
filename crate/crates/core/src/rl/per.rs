//! Proportional prioritized replay on a sum tree.
//!
//! Transition `i` is drawn with probability `p_i / sum_j p_j`, where
//! `p_i = |delta_i| + eps`, and carries the importance weight
//! `(1 / (|D| P(i)))^beta`. New transitions get the largest priority seen so
//! far. When full, the oldest transition is overwritten.

use rand::Rng;

pub const PRIORITY_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    /// Leaf count rounded up to a power of two.
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        let capacity = capacity.next_power_of_two();
        Self { capacity, nodes: vec![0.0; 2 * capacity] }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    pub fn set(&mut self, leaf: usize, value: f64) {
        let mut i = self.capacity + leaf;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass` (`0 <= mass < total`).
    pub fn find(&self, mass: f64) -> usize {
        if self.capacity == 1 {
            return 0;
        }
        let mut i = 1;
        let mut rest = mass;
        while i < self.capacity {
            let left = self.nodes[2 * i];
            if rest < left || self.nodes[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                rest -= left;
                i = 2 * i + 1;
            }
        }
        i - self.capacity
    }
}

#[derive(Debug, Clone)]
pub struct PrioritizedBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    tree: SumTree,
    next: usize,
    max_priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
}

impl<T> PrioritizedBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), tree: SumTree::new(capacity), next: 0, max_priority: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &T {
        &self.items[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.tree.get(index)
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.tree.set(self.next, self.max_priority);
        self.next = (self.next + 1) % self.capacity;
    }

    /// Store `|delta| + eps` for each sampled index.
    pub fn update_priorities(&mut self, indices: &[usize], abs_td: &[f64]) {
        for (&i, &d) in indices.iter().zip(abs_td) {
            let p = d.abs() + PRIORITY_EPSILON;
            self.tree.set(i, p);
            self.max_priority = self.max_priority.max(p);
        }
    }

    /// `batch` independent proportional draws; `None` while the buffer holds
    /// fewer than `batch` transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Option<SampledBatch> {
        if self.items.len() < batch || batch == 0 {
            return None;
        }
        let total = self.tree.total();
        let n = self.items.len() as f64;
        let mut out = SampledBatch { indices: Vec::with_capacity(batch), probabilities: Vec::new(), weights: Vec::new() };
        for _ in 0..batch {
            let mut i = self.tree.find(rng.random::<f64>() * total);
            // Guard against landing on an empty leaf through round-off.
            if i >= self.items.len() || self.tree.get(i) <= 0.0 {
                i = (0..self.items.len()).rev().find(|&j| self.tree.get(j) > 0.0).unwrap_or(0);
            }
            let p = self.tree.get(i) / total;
            out.indices.push(i);
            out.probabilities.push(p);
            out.weights.push((1.0 / (n * p)).powf(beta));
        }
        Some(out)
    }
}

/// Linear anneal of the importance exponent from `start` to 1.
pub fn beta_schedule(start: f64, episode: usize, episodes: usize) -> f64 {
    if episodes <= 1 {
        return 1.0;
    }
    (start + (1.0 - start) * episode as f64 / (episodes - 1) as f64).min(1.0)
}

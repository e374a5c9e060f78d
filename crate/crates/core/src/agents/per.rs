use rand::Rng as _;

use super::replay::ReplayBuffer;
use super::AgentError;
use crate::rng::Rng;

/// Binary tree over leaf values supporting prefix-sum search and a running
/// maximum. Parents are recomputed from their children on every update so
/// no rounding error accumulates.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    sum: Vec<f64>,
    max: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        Self {
            leaves,
            sum: vec![0.0; 2 * leaves],
            max: vec![0.0; 2 * leaves],
        }
    }

    fn set(&mut self, slot: usize, weight: f64, raw: f64) {
        let mut i = slot + self.leaves;
        self.sum[i] = weight;
        self.max[i] = raw;
        while i > 1 {
            i /= 2;
            self.sum[i] = self.sum[2 * i] + self.sum[2 * i + 1];
            self.max[i] = self.max[2 * i].max(self.max[2 * i + 1]);
        }
    }

    fn total(&self) -> f64 {
        self.sum[1]
    }

    fn max_raw(&self) -> f64 {
        self.max[1]
    }

    fn weight(&self, slot: usize) -> f64 {
        self.sum[slot + self.leaves]
    }

    /// Leaf whose cumulative interval contains `u ∈ [0, total)`.
    fn find(&self, mut u: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.sum[2 * i];
            if u < left {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

/// A prioritized sample: slot, sampling probability and normalized
/// importance weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedSample {
    pub slots: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Proportional prioritized replay. Transitions are drawn with probability
/// `p_i^α / Σ p^α`; weights `(N P(i))^-β` are normalized by the batch
/// maximum.
#[derive(Debug, Clone)]
pub struct PrioritizedBuffer<T> {
    items: ReplayBuffer<T>,
    tree: SumTree,
    priorities: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub offset: f64,
}

impl<T> PrioritizedBuffer<T> {
    pub fn new(capacity: usize, alpha: f64, beta: f64, offset: f64) -> Self {
        Self {
            items: ReplayBuffer::new(capacity),
            tree: SumTree::new(capacity),
            priorities: vec![0.0; capacity],
            alpha,
            beta,
            offset,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<&T> {
        self.items.get(slot)
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.priorities[slot]
    }

    fn set_priority(&mut self, slot: usize, p: f64) {
        self.priorities[slot] = p;
        self.tree.set(slot, p.powf(self.alpha), p);
    }

    /// Insert with the largest stored priority, or 1 into an empty buffer.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.items.next_slot();
        // A recycled slot's old priority must not count towards the max.
        self.tree.set(slot, 0.0, 0.0);
        let max = self.tree.max_raw();
        let p = if max > 0.0 { max } else { 1.0 };
        self.items.push(item);
        self.set_priority(slot, p);
        slot
    }

    /// Probability of drawing `slot` on a single draw.
    pub fn probability(&self, slot: usize) -> f64 {
        self.tree.weight(slot) / self.tree.total()
    }

    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<PrioritizedSample, AgentError> {
        let n = self.items.len();
        if batch > n || batch == 0 {
            return Err(AgentError::Underfull { have: n, need: batch.max(1) });
        }
        let total = self.tree.total();
        let mut slots = Vec::with_capacity(batch);
        let mut probabilities = Vec::with_capacity(batch);
        for _ in 0..batch {
            let u = rng.random::<f64>() * total;
            let mut slot = self.tree.find(u);
            if slot >= n || self.tree.weight(slot) == 0.0 {
                slot = self.last_occupied();
            }
            slots.push(slot);
            probabilities.push(self.probability(slot));
        }
        let raw: Vec<f64> = probabilities
            .iter()
            .map(|&p| (n as f64 * p).powf(-self.beta))
            .collect();
        let max = raw.iter().cloned().fold(0.0, f64::max);
        let weights = raw.iter().map(|w| w / max).collect();
        Ok(PrioritizedSample {
            slots,
            probabilities,
            weights,
        })
    }

    /// Last slot with positive weight; only reached when rounding pushes
    /// the tree search past the final occupied leaf.
    fn last_occupied(&self) -> usize {
        (0..self.items.len())
            .rev()
            .find(|&s| self.tree.weight(s) > 0.0)
            .expect("non-empty buffer has positive mass")
    }

    /// `p_i = |error_i| + offset`.
    pub fn update(&mut self, slots: &[usize], errors: &[f64]) {
        for (&slot, &e) in slots.iter().zip(errors) {
            let p = e.abs() + self.offset;
            self.set_priority(slot, p);
        }
    }
}

/// Linear-scan reference sampler used to cross-check the tree.
#[cfg(test)]
pub(crate) fn linear_scan_find(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

use rand::seq::index;

use super::AgentError;
use crate::rng::Rng;

/// Stored experience. `reward` is the (possibly multistep) return and
/// `discount` the factor applied to the bootstrap value of `next_state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub discount: f64,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
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

    /// Slot the next [`ReplayBuffer::push`] will write.
    pub fn next_slot(&self) -> usize {
        self.next
    }

    /// Insert, overwriting the oldest item when full. Returns the slot used.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    pub fn get(&self, slot: usize) -> Option<&T> {
        self.items.get(slot)
    }

    /// `batch` distinct slots drawn uniformly.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<usize>, AgentError> {
        if batch > self.items.len() {
            return Err(AgentError::Underfull {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch).into_vec())
    }
}

/// `Σ_{k<n} γ^k r_k` over the first `n` rewards and the bootstrap discount
/// `γ^n`.
pub fn multistep_return(rewards: &[f64], n: usize, gamma: f64) -> Result<(f64, f64), AgentError> {
    if n == 0 || rewards.len() < n {
        return Err(AgentError::ShortWindow {
            have: rewards.len(),
            need: n.max(1),
        });
    }
    let mut ret = 0.0;
    let mut g = 1.0;
    for &r in &rewards[..n] {
        ret += g * r;
        g *= gamma;
    }
    Ok((ret, g))
}

#[derive(Debug, Clone)]
struct Pending {
    state: Vec<f64>,
    action: usize,
    reward: f64,
}

/// Turns a stream of one-step experience into `n`-step transitions. With no
/// terminal states the window simply slides.
#[derive(Debug, Clone)]
pub struct NStepBuffer {
    n: usize,
    gamma: f64,
    window: std::collections::VecDeque<Pending>,
}

impl NStepBuffer {
    pub fn new(n: usize, gamma: f64) -> Self {
        assert!(n >= 1, "n-step length must be >= 1");
        Self {
            n,
            gamma,
            window: std::collections::VecDeque::with_capacity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Record `(s, a, r)` followed by `next_state`; emits the transition that
    /// starts `n - 1` steps earlier once enough history exists.
    pub fn push(
        &mut self,
        state: &[f64],
        action: usize,
        reward: f64,
        next_state: &[f64],
    ) -> Option<Transition> {
        self.window.push_back(Pending {
            state: state.to_vec(),
            action,
            reward,
        });
        if self.window.len() < self.n {
            return None;
        }
        let rewards: Vec<f64> = self.window.iter().map(|p| p.reward).collect();
        let (ret, discount) =
            multistep_return(&rewards, self.n, self.gamma).expect("window is full");
        let first = self.window.pop_front().expect("window is full");
        Some(Transition {
            state: first.state,
            action: first.action,
            reward: ret,
            next_state: next_state.to_vec(),
            discount,
        })
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

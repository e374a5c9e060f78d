use super::AgentError;

/// Equally spaced return atoms `z_i = v_min + i Δz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub v_min: f64,
    pub v_max: f64,
    pub atoms: usize,
}

impl Support {
    pub fn new(v_min: f64, v_max: f64, atoms: usize) -> Result<Self, AgentError> {
        if !(v_min < v_max) || atoms < 2 {
            return Err(AgentError::Config(format!(
                "support needs v_min < v_max and >= 2 atoms, got [{v_min}, {v_max}] with {atoms}"
            )));
        }
        Ok(Self { v_min, v_max, atoms })
    }

    pub fn delta(&self) -> f64 {
        (self.v_max - self.v_min) / (self.atoms - 1) as f64
    }

    pub fn atom(&self, i: usize) -> f64 {
        if i + 1 == self.atoms {
            self.v_max
        } else {
            self.v_min + i as f64 * self.delta()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.atoms).map(|i| self.atom(i)).collect()
    }

    /// `Σ z_i d_i`.
    pub fn expectation(&self, probs: &[f64]) -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.atom(i))
            .sum()
    }
}

/// Project the distribution `probs` shifted by `reward + discount · z` back
/// onto `support`, splitting each atom's mass linearly between its two
/// neighbours. Total mass is preserved.
pub fn categorical_projection(probs: &[f64], reward: f64, discount: f64, support: &Support) -> Vec<f64> {
    let n = support.atoms;
    debug_assert_eq!(probs.len(), n);
    let dz = support.delta();
    // Positions are measured in atom units from the origin so that
    // grid-aligned returns land on exact integers.
    let origin = support.v_min / dz;
    let mut m = vec![0.0; n];
    for (j, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let tz = (reward + discount * support.atom(j)).clamp(support.v_min, support.v_max);
        let mut b = (tz / dz - origin).clamp(0.0, (n - 1) as f64);
        let nearest = b.round();
        if (b - nearest).abs() < 1e-9 {
            b = nearest;
        }
        let l = b.floor() as usize;
        let u = b.ceil() as usize;
        if l == u {
            m[l] += p;
        } else {
            m[l] += p * (u as f64 - b);
            m[u] += p * (b - l as f64);
        }
    }
    m
}

/// `Σ m_i (ln m_i - ln d_i)` with `0 ln 0 = 0`.
pub fn kl_loss(target: &[f64], predicted: &[f64]) -> f64 {
    target
        .iter()
        .zip(predicted)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &d)| m * (m.ln() - d.ln()))
        .sum()
}

use ndarray::ArrayView2;
use rand::Rng as _;

use crate::rng::Rng;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. The RNG is only consulted when `epsilon > 0`.
pub fn select_action(values: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..values.len())
    } else {
        argmax(values)
    }
}

/// `ε ← (1 - decay) ε` while above `min`, never dropping below it.
pub fn epsilon_decay(epsilon: f64, decay: f64, min: f64) -> f64 {
    if epsilon > min {
        ((1.0 - decay) * epsilon).max(min)
    } else {
        epsilon
    }
}

/// `y_i = r_i + d_i max_a Q̂(s'_i, a)`.
pub fn dqn_target(rewards: &[f64], discounts: &[f64], q_next_target: ArrayView2<f64>) -> Vec<f64> {
    q_next_target
        .outer_iter()
        .zip(rewards.iter().zip(discounts))
        .map(|(row, (&r, &d))| {
            let row = row.to_vec();
            r + d * row[argmax(&row)]
        })
        .collect()
}

/// `y_i = r_i + d_i Q̂(s'_i, argmax_a Q(s'_i, a))`.
pub fn ddqn_target(
    rewards: &[f64],
    discounts: &[f64],
    q_next_online: ArrayView2<f64>,
    q_next_target: ArrayView2<f64>,
) -> Vec<f64> {
    q_next_online
        .outer_iter()
        .zip(q_next_target.outer_iter())
        .zip(rewards.iter().zip(discounts))
        .map(|((online, target), (&r, &d))| {
            let a = argmax(&online.to_vec());
            r + d * target[a]
        })
        .collect()
}

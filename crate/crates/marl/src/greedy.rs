//! Epsilon-greedy action selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Index of the maximum Q-value; ties break to the lowest index.
pub fn argmax(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q_values.iter().enumerate().skip(1) {
        if v > q_values[best] {
            best = i;
        }
    }
    best
}

/// Greedy action with probability 1 - epsilon, uniform random otherwise.
pub fn epsilon_greedy(q_values: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    debug_assert!(!q_values.is_empty());
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use evshunt_core::rng::{seeded_rng, streams};

    #[test]
    fn greedy_limit_always_argmax() {
        let mut rng = seeded_rng(1, streams::EXPLORATION, 0);
        let q = [0.1, 0.9, 0.3];
        for _ in 0..1000 {
            assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let q = [0.5, 0.5, 0.5];
        assert_eq!(argmax(&q), 0);
        let q2 = [0.1, 0.7, 0.7];
        assert_eq!(argmax(&q2), 1);
    }

    #[test]
    fn random_limit_is_roughly_uniform() {
        let mut rng = seeded_rng(2, streams::EXPLORATION, 0);
        let q = [0.1, 0.9, 0.3, 0.2, 0.0];
        let n = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[epsilon_greedy(&q, 1.0, &mut rng)] += 1;
        }
        // Chi-squared sanity against uniform: 4 dof, 0.999 quantile ~ 18.5.
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 18.5, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn intermediate_epsilon_matches_closed_form_rate() {
        let mut rng = seeded_rng(3, streams::EXPLORATION, 0);
        let q = [0.1, 0.9, 0.3, 0.2, 0.0];
        let epsilon = 0.3;
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| epsilon_greedy(&q, epsilon, &mut rng) == 1)
            .count();
        let freq = hits as f64 / n as f64;
        let expected = 1.0 - epsilon + epsilon / q.len() as f64;
        assert!(
            (freq - expected).abs() < 0.02,
            "freq {freq} vs closed form {expected}"
        );
    }
}

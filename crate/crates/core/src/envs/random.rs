use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::scalar::Scalar;

/// Random MDP with discount 0.9. See [`random_mdp_with_gamma`].
pub fn random_mdp<T: Scalar>(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    seed: u64,
) -> Result<TabularMdp<T>> {
    random_mdp_with_gamma(n_states, n_actions, branching, T::lit(0.9), seed)
}

/// Each `(s, a)` row puts positive mass on `branching` distinct next states
/// (weights drawn uniformly from (0, 1] and normalized); rewards are uniform
/// on [0, 1). Deterministic in `seed`.
pub fn random_mdp_with_gamma<T: Scalar>(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    gamma: T,
    seed: u64,
) -> Result<TabularMdp<T>> {
    if branching == 0 || branching > n_states {
        return Err(Error::InvalidArgument(format!(
            "branching {branching} must be in 1..={n_states}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![T::zero(); n_states * n_actions * n_states];
    let mut reward = Vec::with_capacity(n_states * n_actions);
    for sa in 0..n_states * n_actions {
        let next = sample(&mut rng, n_states, branching);
        let weights: Vec<f64> = (0..branching).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let row = &mut transition[sa * n_states..(sa + 1) * n_states];
        for (s, w) in next.iter().zip(&weights) {
            row[s] = T::lit(w / total);
        }
        // put the rounding error on the largest entry
        let sum: T = row.iter().copied().sum();
        let big = crate::mdp::argmax(row);
        row[big] = row[big] + (T::one() - sum);
        reward.push(T::lit(rng.gen::<f64>()));
    }
    TabularMdp::new(n_states, n_actions, transition, reward, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a: TabularMdp<f64> = random_mdp(6, 3, 2, 11).unwrap();
        let b: TabularMdp<f64> = random_mdp(6, 3, 2, 11).unwrap();
        let c: TabularMdp<f64> = random_mdp(6, 3, 2, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn branching_one_is_deterministic() {
        let m: TabularMdp<f64> = random_mdp(5, 2, 1, 3).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                assert_eq!(m.successors(s, a).len(), 1);
                assert_eq!(m.successors(s, a)[0].1, 1.0);
            }
        }
    }

    #[test]
    fn rows_validate_in_both_precisions() {
        for seed in 0..20 {
            assert!(random_mdp::<f64>(10, 4, 10, seed).is_ok());
            assert!(random_mdp::<f32>(10, 4, 7, seed).is_ok());
        }
        assert!(random_mdp::<f64>(3, 2, 4, 0).is_err());
    }
}

//! Reproducible random many-visits instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{CostMatrix, MvtspInstance};

/// Visits uniform in `1..=k_max` and costs uniform in `0..=cost_max`.
/// Loops are always finite; other edges are finite with probability
/// `density`.
pub fn random_instance(n: usize, k_max: u64, cost_max: u64, density: f64, seed: u64) -> MvtspInstance {
    assert!(n >= 1 && k_max >= 1, "need at least one vertex and one visit");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = density.clamp(0.0, 1.0);
    let mut cells = Vec::with_capacity(n * n);
    for u in 0..n {
        for v in 0..n {
            let finite = u == v || rng.gen_bool(density);
            cells.push(finite.then(|| rng.gen_range(0..=cost_max)));
        }
    }
    let visits = (0..n).map(|_| rng.gen_range(1..=k_max)).collect();
    MvtspInstance::new(CostMatrix::new(n, cells), visits).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let a = random_instance(5, 3, 9, 0.7, 11);
        assert_eq!(a, random_instance(5, 3, 9, 0.7, 11));
        assert!((0..5).all(|v| a.costs().is_finite(v, v)));
        assert!(a.visits().iter().all(|&k| (1..=3).contains(&k)));
        assert!(a.costs().max_finite() <= 9);
    }

    #[test]
    fn unit_triangle() {
        let t = random_instance(3, 1, 1, 1.0, 7);
        assert_eq!(t.visits(), &[1, 1, 1]);
        assert!((0..3).all(|u| (0..3).all(|v| t.costs().is_finite(u, v))));
    }

    #[test]
    fn empty_density_keeps_only_loops() {
        let t = random_instance(4, 2, 5, 0.0, 3);
        assert!((0..4).all(|u| (0..4).all(|v| t.costs().is_finite(u, v) == (u == v))));
    }
}

//! Synthetic workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeseg::Dataset;

/// `n` rows of `d` uniform features on [-1, 1] with a piecewise response:
/// a different linear function on each side of `x0 = 0`, plus a smooth bump.
pub fn piecewise(n: usize, d: usize, seed: u64) -> Dataset {
    assert!(d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| {
            let tail: f64 = r[1..].iter().sum();
            let base = if r[0] <= 0.0 { 2.0 * r[0] + tail } else { 4.0 - r[0] - 0.5 * tail };
            base + (3.0 * r[0]).sin() + 0.1 * rng.random_range(-1.0..1.0)
        })
        .collect();
    Dataset::from_rows(&rows, y).expect("generator produces consistent rows")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let a = piecewise(50, 3, 1);
        assert_eq!((a.n_rows(), a.n_features()), (50, 3));
        assert_eq!(a, piecewise(50, 3, 1));
        assert_ne!(a, piecewise(50, 3, 2));
    }
}

//! Instance generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` votes uniform in `[-1, 1]` with `lambda` at half the mean margin.
pub fn random_votes(n: usize, seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let votes: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mean = votes.iter().map(|a| a.abs()).sum::<f64>() / n as f64;
    (votes, 0.5 * mean)
}

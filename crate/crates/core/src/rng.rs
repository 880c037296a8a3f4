//! Seeded randomness shared by every component that shuffles.
//!
//! All shuffles are the textbook Fisher–Yates walk: for `i` from `n - 1`
//! down to `1`, draw `j` uniformly from `0..=i` and swap `i` and `j`. The
//! generator is ChaCha8 seeded from a `u64`, so a seed pins every partition,
//! fold plan and candidate order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fisher_yates<T>(items: &mut [T], rng: &mut SeededRng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Draws `n` distinct values from `0..population` in sampled order using a
/// partial Fisher–Yates walk from the front.
pub fn sample_without_replacement(population: usize, n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..population).collect();
    let n = n.min(population);
    for i in 0..n {
        let j = rng.gen_range(i..population);
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool
}

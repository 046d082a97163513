//! Reproducible random streams.
//!
//! Every Monte Carlo routine takes a caller-supplied generator, draws one
//! 64-bit key from it and derives an independent ChaCha stream per replica.
//! Results therefore do not depend on the rayon thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for a top-level seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` under `key`.
pub fn stream(key: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Draws a fresh key for a family of replica streams.
pub fn split_key<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

/// An independent child generator (used for nested estimators).
pub fn split<R: Rng + ?Sized>(rng: &mut R) -> StreamRng {
    ChaCha8Rng::seed_from_u64(rng.next_u64())
}

/// Runs `n` replicas in parallel, replica `i` on `stream(key, i)`, and
/// returns the results in replica order.
pub fn replicate<T, F>(key: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(key, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

//! Seeded random streams and deterministic parallel replicate loops.
//!
//! Every random quantity in the crate is drawn from a [`RngStream`], which is
//! a ChaCha8 generator keyed by a 64-bit master seed and a stream index.
//! Replicate loops split their work into fixed-size blocks, give block `b`
//! the stream `b`, and collect results in replicate order, so the output does
//! not depend on how many worker threads rayon happens to use.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Replicates per parallel block. Changing this changes every seeded result.
pub const BLOCK_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// SplitMix64 finalizer; used to derive child seeds from a master seed and a tag.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for an experiment cell, e.g. `derive_seed(seed, &[n, r.to_bits()])`.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(mix64(seed), |acc, &t| mix64(acc ^ mix64(t)))
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Runs `f` once per replicate and returns the results in replicate order.
///
/// Replicate `i` draws from block stream `i / BLOCK_SIZE` of `seed`; within a
/// block replicates run sequentially, so the output is identical for any
/// number of worker threads.
pub fn replicate<T, F>(seed: u64, replicates: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let blocks = replicates.div_ceil(BLOCK_SIZE);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64).rng();
            let len = BLOCK_SIZE.min(replicates - b * BLOCK_SIZE);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

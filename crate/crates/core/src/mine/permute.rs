//! Keyed permutation of `0..n` without materializing it.
//!
//! A balanced Feistel network permutes the smallest even-bit power-of-two
//! domain covering `n`; cycle walking re-applies it until the output lands
//! back in `0..n`. The domain is under 4n, so the expected walk is short.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::TokenSpace;

const ROUNDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPermutation {
    n: u64,
    half_bits: u32,
    keys: [u64; ROUNDS],
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl IndexPermutation {
    /// Permutation of `0..n` keyed by `seed` and `tweak`.
    pub fn new(n: u64, seed: u64, tweak: &[u8]) -> Self {
        let bits = if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() };
        let half_bits = bits.div_ceil(2).max(1);
        let first = Sha256::new()
            .chain_update(seed.to_le_bytes())
            .chain_update(tweak)
            .finalize();
        let second = Sha256::digest(first);
        let mut material = first.iter().chain(second.iter()).copied();
        let keys = std::array::from_fn(|_| {
            let mut word = [0u8; 8];
            word.iter_mut().for_each(|b| *b = material.next().unwrap_or(0));
            u64::from_le_bytes(word)
        });
        Self { n, half_bits, keys }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn round_trip(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let (mut left, mut right) = (x >> self.half_bits, x & mask);
        for key in &self.keys {
            let f = mix(right ^ key) & mask;
            (left, right) = (right, left ^ f);
        }
        (left << self.half_bits) | right
    }

    /// Image of `i` under the permutation; `i` must be below `len()`.
    pub fn apply(&self, i: u64) -> u64 {
        assert!(i < self.n, "index {i} outside permutation of {}", self.n);
        if self.n == 1 {
            return 0;
        }
        let mut x = self.round_trip(i);
        while x >= self.n {
            x = self.round_trip(x);
        }
        x
    }
}

/// One worker's share of a prefix's suffix universe: permutation positions
/// `worker, worker + workers, ...` below `limit`.
#[derive(Debug, Clone)]
pub struct WorkerStream {
    space: Arc<TokenSpace>,
    perm: Arc<IndexPermutation>,
    next: u64,
    step: u64,
    limit: u64,
}

impl Iterator for WorkerStream {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        if self.next >= self.limit {
            return None;
        }
        let suffix = self.space.suffix_at(self.perm.apply(self.next));
        self.next += self.step;
        Some(suffix)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = if self.next >= self.limit {
            0
        } else {
            (self.limit - self.next).div_ceil(self.step)
        };
        let left = usize::try_from(left).unwrap_or(usize::MAX);
        (left, Some(left))
    }
}

/// Splits the first `limit` positions of the seeded suffix permutation for
/// `prefix` across `workers` by stride. `limit` is clamped to A^S.
pub fn worker_streams(space: &TokenSpace, prefix: &str, workers: usize, seed: u64, limit: u64) -> Vec<WorkerStream> {
    assert!(workers >= 1, "at least one worker");
    let space = Arc::new(space.clone());
    let perm = Arc::new(IndexPermutation::new(space.suffix_count(), seed, prefix.as_bytes()));
    let limit = limit.min(space.suffix_count());
    (0..workers as u64)
        .map(|w| WorkerStream {
            space: Arc::clone(&space),
            perm: Arc::clone(&perm),
            next: w,
            step: workers as u64,
            limit,
        })
        .collect()
}

/// Disjoint per-worker enumeration streams covering every suffix of
/// `prefix` exactly once, reproducible from `(space, prefix, workers, seed)`.
pub fn partition_tokenspace(space: &TokenSpace, prefix: &str, workers: usize, seed: u64) -> Vec<WorkerStream> {
    worker_streams(space, prefix, workers, seed, u64::MAX)
}

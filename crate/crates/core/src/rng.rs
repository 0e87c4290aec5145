//! Deterministic random streams.
//!
//! Every corruption task owns one [`SeededRng`] whose seed is derived from
//! the run's global seed, the scene id, the corruption kind and the level.
//! Streams are reproducible within this implementation only.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Seed for the (scene, corruption, level) task under `global_seed`.
pub fn child_seed(global_seed: u64, scene_id: &str, kind: &str, level: u8) -> u64 {
    let mut h = splitmix64(global_seed);
    // length prefixes keep ("ab","c") and ("a","bc") apart
    h = fnv1a(h, &(scene_id.len() as u64).to_le_bytes());
    h = fnv1a(h, scene_id.as_bytes());
    h = fnv1a(h, &(kind.len() as u64).to_le_bytes());
    h = fnv1a(h, kind.as_bytes());
    h = fnv1a(h, &[level]);
    splitmix64(h ^ FNV_OFFSET)
}

/// Single-owner pseudorandom stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `tag`; does not advance `self`.
    pub fn fork(&self, tag: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(tag)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi, "empty integer range {lo}..={hi}");
        self.inner.random_range(lo..=hi)
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index into an empty range");
        self.inner.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.random()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// `k` distinct values from `[0, n)`, uniformly, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n} without replacement");
        index::sample(&mut self.inner, n, k).into_vec()
    }

    /// `k` distinct elements of `pool`, uniformly, in draw order.
    pub fn sample_from(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        self.sample_indices(pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    }
}

//! Seeded random streams.
//!
//! Every stochastic operation takes a [`SimRng`] explicitly. The generator is
//! ChaCha8 (`rand_chacha`), whose output stream is specified by the algorithm
//! and identical on every platform for a given 64-bit seed. Parallel
//! consumers never share a stream: they derive their own with
//! [`SimRng::split`] or [`derive_seed`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        SimRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent stream keyed by `stream`, leaving `self` untouched.
    pub fn split(&self, stream: u64) -> SimRng {
        let mut inner = self.inner.clone();
        inner.set_word_pos(0);
        inner.set_stream(stream.wrapping_add(1));
        SimRng { inner }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// One Bernoulli trial: `uniform() < p`. With `p = 0` this is never true
    /// and with `p = 1` always true.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn range_usize(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.inner.gen_range(lo..=hi_inclusive)
    }

    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }
}

/// SplitMix64 finalizer, used to derive child seeds from a master seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index))
}

/// Seeds for `count` coupled repeats of one configuration.
pub fn repeat_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::from_seed(7);
        let mut b = SimRng::from_seed(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_differ_from_parent_and_each_other() {
        let root = SimRng::from_seed(7);
        let mut parent = root.clone();
        let mut s1 = root.split(1);
        let mut s2 = root.split(2);
        let p: Vec<u64> = (0..4).map(|_| parent.next_u64()).collect();
        let a: Vec<u64> = (0..4).map(|_| s1.next_u64()).collect();
        let b: Vec<u64> = (0..4).map(|_| s2.next_u64()).collect();
        assert_ne!(p, a);
        assert_ne!(a, b);
        let mut again = root.split(1);
        assert_eq!(a[0], again.next_u64());
    }

    #[test]
    fn chacha8_stream_is_pinned() {
        // Guards against an accidental generator swap changing every frozen result.
        let mut r = SimRng::from_seed(0);
        assert_eq!(r.next_u64(), 0xb585_f767_a79a_3b6c);
        assert_eq!(derive_seed(1, 0), 0x08b4_fda8_c892_b50e);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}

//! Seeded, platform-independent random streams.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// SplitMix64 finalizer, used to derive well-spread seeds from structured keys.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of keys into one seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x5EED_u64, |acc, &k| mix64(acc ^ mix64(k)))
}

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting the ChaCha stream, so the same
/// pair yields the same sequence on every platform. Not meant to be shared
/// between threads: derive a [`child`](SeededRng::child) per worker instead.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// An independent stream derived from this one's identity and `id`.
    /// Does not advance `self`.
    pub fn child(&self, id: u64) -> Self {
        Self::new(self.seed, derive_seed(&[self.stream_id, id]))
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_identity_same_sequence() {
        let mut a = SeededRng::new(7, 3);
        let mut b = SeededRng::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let root = SeededRng::new(7, 0);
        let mut a = root.child(1);
        let mut b = root.child(2);
        let xs: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
        let mut a2 = root.child(1);
        assert_eq!(xs[0].to_bits(), a2.uniform().to_bits());
    }

    #[test]
    fn child_streams_are_uncorrelated() {
        let root = SeededRng::new(11, 0);
        let mut a = root.child(10);
        let mut b = root.child(11);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| a.uniform() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // var of U(-.5,.5) is 1/12; correlation 3-sigma bound is 3/sqrt(n)
        assert!((cov * 12.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn derive_seed_is_order_sensitive() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[1, 2]), derive_seed(&[1, 2]));
    }
}

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids carving one seed into independent generators.
///
/// Keeping the purposes on separate streams means e.g. toggling dropout does
/// not shift which samples a shuffle visits.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const SAMPLER: u64 = 3;
}

/// Deterministic random source.
///
/// Wraps ChaCha8 but owns the u64 → f64 conversion so that reruns reproduce
/// bit-identical values regardless of how the rand ecosystem evolves.
#[derive(Debug, Clone)]
pub struct RngState {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState::with_stream(seed, stream::INIT)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState {
            inner,
            seed,
            stream,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh generator on the same seed, different stream (position reset).
    pub fn fork(&self, stream: u64) -> RngState {
        RngState::with_stream(self.seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1): top 53 bits scaled by 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in [0, n) via rejection of the biased tail.
    pub fn next_below(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_below(0)");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from [0, n), in draw order.
    ///
    /// Partial Fisher–Yates over an index vector; O(n) space, O(k) swaps.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_indices: k={k} > n={n}");
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

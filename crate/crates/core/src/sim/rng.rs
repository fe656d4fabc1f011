//! Per-scenario random streams.
//!
//! A stream is identified by `(seed, index)`. The pair is folded into one
//! 64-bit stream seed with the SplitMix64 finalizer:
//!
//! ```text
//! stream_seed = mix(seed ^ mix(index + 0x9E3779B97F4A7C15))
//! mix(z): z = (z ^ z>>30) * 0xBF58476D1CE4E5B9
//!         z = (z ^ z>>27) * 0x94D049BB133111EB
//!         z ^ z>>31
//! ```
//!
//! and the stream seed keys a ChaCha8 generator. Streams therefore never
//! depend on batch size, ordering or thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self::from_stream_seed(stream_seed(seed, index))
    }

    pub fn from_stream_seed(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream_seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`. Always consumes exactly one 64-bit word.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Bernoulli draw that consumes one word even for `p` of 0 or 1, so the
    /// draws after it stay aligned when a probability changes.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

//! Seeded randomness: named sub-streams for the evolutionary machinery and a
//! small, portable generator for everything that other implementations must
//! be able to reproduce byte for byte (instance layouts and container
//! weights). The portable algorithms are documented in `docs/formats.md`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random sub-streams derived from the single experiment seed, so each
/// component can be reproduced in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial population genomes.
    Init,
    /// Tournament sampling in the steady-state loop.
    Selection,
    /// Crossover/mutation operator choices and their internal draws.
    Operators,
    /// Container weight generation.
    Weights,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Selection => 2,
            Stream::Operators => 3,
            Stream::Weights => 4,
        }
    }
}

/// Independent generator for one named sub-stream of `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// SplitMix64, the fixed 64-bit generator behind instance generation and
/// weight attachment. Chosen because the whole algorithm fits in a dozen
/// lines and can be restated exactly for reimplementations.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` via the 128-bit multiply-shift reduction.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is undefined");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Fisher-Yates shuffle, iterating i from len-1 down to 1 and swapping
    /// with index `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// FNV-1a over raw bytes; folds instance ids into weight-stream seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

//! Deterministic randomness plumbing.
//!
//! Seed derivation and the cross-validation shuffle are pinned so results
//! are reproducible byte-for-byte across platforms and thread counts:
//!
//! * `SplitMix64` is the 64-bit generator from Steele et al. (2014):
//!   state advances by 0x9E3779B97F4A7C15 and the output is the
//!   xor-shift/multiply finalizer below.
//! * Fisher-Yates draws `j = next() mod (i + 1)` for `i = n-1 .. 1`.
//! * Sampling streams (data generation, bootstrap resampling) are ChaCha8
//!   generators seeded from `derive_seed(base, tags)`, one independent
//!   stream per (cell, replicate) unit of work.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 generator.
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
}

/// Mix a base seed with a sequence of tags into a single derived seed.
///
/// Used to give every (cell, replicate, purpose) its own independent
/// stream without any cross-talk between units of parallel work.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut mix = SplitMix64::new(base);
    let mut out = mix.next_u64();
    for &t in tags {
        let mut inner = SplitMix64::new(out ^ t.wrapping_mul(0xA24B_AED4_963E_E407));
        out = inner.next_u64();
    }
    out
}

/// A ChaCha8 sampling stream for a derived seed.
pub fn sampling_rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// In-place Fisher-Yates shuffle driven by SplitMix64.
pub fn fisher_yates_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = SplitMix64::new(seed);
    let n = items.len();
    if n < 2 {
        return;
    }
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

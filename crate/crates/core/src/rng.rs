//! Seeded random source for the stochastic kernels.
//!
//! Every call site builds a fresh ChaCha8 stream from a 64-bit seed. ChaCha is
//! counter-based, so a stream is a pure function of its seed and draws never
//! depend on thread scheduling. Reproducibility is bit-exact within this
//! implementation; other languages would need the same stream and the same
//! normal sampler to match.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type KernelRng = ChaCha8Rng;

pub fn kernel_rng(seed: u64) -> KernelRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

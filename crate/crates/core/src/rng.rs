//! Seeded random streams.
//!
//! All sampling uses Xoshiro256++ (version-pinned through `rand_xoshiro`),
//! seeded by expanding a 64-bit seed with SplitMix64. Independent streams
//! are derived by mixing a stream label into the seed with the SplitMix64
//! finalizer (constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9,
//! 0x94D049BB133111EB).

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `seed`, independent of other `stream` labels.
pub fn stream(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// A 64-bit seed derived from `(seed, label)`, for handing to other seeded APIs.
pub fn derive(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

//! Seeding rules. Every generator in the crate is a `ChaCha8Rng` seeded
//! through [`derive_seed`] or [`chain_seed`]; nothing reads the clock.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ModelRng = ChaCha8Rng;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a seed: `s <- mix64(s ^ w)` for each word.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(base), |s, &w| mix64(s ^ w))
}

/// Seed of replicate chain `chain_id`: the chain id is XOR-folded into the
/// base seed after its own mixing round.
#[inline]
pub fn chain_seed(base: u64, chain_id: u64) -> u64 {
    mix64(base ^ mix64(chain_id))
}

pub fn rng_from_seed(seed: u64) -> ModelRng {
    ChaCha8Rng::seed_from_u64(seed)
}

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-seed for a named purpose and index, stable across runs
/// and platforms.
pub fn derive_seed(base: u64, purpose: &str, index: u64) -> u64 {
    let tag = purpose.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.set_word_pos(index as u128 * 2);
    rng.next_u64()
}

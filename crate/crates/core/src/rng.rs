//! Deterministic randomness.
//!
//! Every stochastic site in the crate (parameter init, batch shuffling,
//! synthetic data, missing-embedding fill) draws from its own ChaCha stream,
//! derived from one master seed plus a stable string label. Two runs with the
//! same master seed are bit-identical; adding a new stochastic site never
//! perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derive a sub-seed from `master` and a site label.
///
/// FNV-1a over the label bytes, xor-folded into the master seed and finished
/// with a splitmix64 mix so that nearby labels map to unrelated seeds.
pub fn subseed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = (master ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha stream for one stochastic site.
pub fn stream(master: u64, label: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(subseed(master, label))
}

//! Small internal helpers.

/// Deterministic seed derivation for independent RNG substreams
/// (splitmix64 finalizer over the pair). Used so that permutation draws
/// and simulation trials are pure functions of (base seed, index),
/// independent of execution order.
pub(crate) fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Deterministic seed derivation for search algorithms and environments.
//!
//! Every stochastic decision in the crate draws from a seed derived with
//! [`mix`], so identical `(spec, parameters, seed)` triples replay
//! byte-identically regardless of execution order.

/// One round of the splitmix64 output permutation.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and two stream indices.
pub fn mix(base: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(base ^ splitmix(stream)).wrapping_add(index))
}

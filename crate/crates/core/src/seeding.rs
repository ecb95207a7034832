//! Deterministic derivation of independent RNG seeds from a base seed.
//!
//! Every component that needs several generators (one per SNP, one per
//! repeat, one per noise source) derives them as mix(base, stream) so results
//! never depend on scheduling or evaluation order.

/// SplitMix64-style finalizer over the pair (base, stream). Distinct streams
/// give well-separated seeds even for adjacent base values.
pub fn mix(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

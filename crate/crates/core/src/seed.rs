/// SplitMix64 finalizer; derives independent stream seeds from a base seed
/// and integer keys.
pub(crate) fn mix(base: u64, keys: &[u64]) -> u64 {
    let mut z = base;
    for &k in keys {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

//! Stable derivation of per-unit seeds from a run seed and a label, so that
//! groups and stages can be processed in any order (or in parallel) without
//! changing results.

/// Derives a child seed from `base` and a textual label.
///
/// FNV-1a over the label mixed through a splitmix64 finalizer. The result
/// depends only on the inputs, never on iteration order or platform.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Seed derivation. Every random decision in the library flows from one
//! master seed through this module, so runs are reproducible end to end.

/// splitmix64 step; used as the mixing primitive for seed derivation.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` for the given domain label and index.
///
/// The domain keeps independent consumers (e.g. per-run parameter init vs.
/// per-candidate mode sampling) on disjoint streams even when indices clash.
pub fn derive(master: u64, domain: &str, index: u64) -> u64 {
    let mut state = master;
    for &b in domain.as_bytes() {
        state = splitmix64(&mut state) ^ u64::from(b);
    }
    state ^= index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut state)
}

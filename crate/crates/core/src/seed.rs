//! Named seed derivation.
//!
//! Every random stream in a run comes from one root seed mixed with a stage
//! name and an index, so a stage can be re-run on its own and still see the
//! same numbers. The mixing is FNV-1a over the name followed by SplitMix64;
//! both are fixed here so results do not depend on std's hasher.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(root: u64, stage: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(stage.as_bytes())) ^ splitmix64(index))
}

//! Stable per-window seed derivation.
//!
//! Each exported window gets its own RNG stream keyed on
//! `(master_seed, episode_id, window_index)`. The derivation is fixed here
//! (FNV-1a over the key bytes, finished with the SplitMix64 mixer) so seeds
//! do not change with the standard library's hasher or the worker count.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn derive_seed(master_seed: u64, episode_id: &str, window_index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&master_seed.to_le_bytes());
    feed(&(episode_id.len() as u64).to_le_bytes());
    feed(episode_id.as_bytes());
    feed(&window_index.to_le_bytes());
    splitmix64(h)
}

/// Independent sub-stream of a window seed, e.g. audio vs. image draws.
pub fn substream(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

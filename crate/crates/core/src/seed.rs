//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a component name mixed into
//! the global seed, so adding a new consumer never shifts an existing stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a over the component name. Stable across platforms and releases.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(seed: u64, component: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(component)))
}

pub fn derive_indexed(seed: u64, component: &str, index: u64) -> u64 {
    splitmix64(derive(seed, component) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(seed: u64, component: &str) -> Rng {
    Rng::seed_from_u64(derive(seed, component))
}

pub fn rng_indexed(seed: u64, component: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_indexed(seed, component, index))
}

//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by `(master_seed, purpose, index)`.
//! The mapping is a fixed FNV-1a hash of the purpose label folded into a
//! SplitMix64 finalizer, so a replicate or bootstrap draw gets the same stream
//! no matter which worker executes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Child seed for stream `index` of the named purpose.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let a = splitmix64(master ^ fnv1a(label));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, label: &str, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, label, index))
}

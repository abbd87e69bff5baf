//! Deterministic seed derivation.
//!
//! Every place that needs several independent RNG streams (per-episode
//! generation, per-run benchmark splits, per-method training) derives child
//! seeds from a master seed with the splitmix64 finalizer, so a single
//! configured seed pins the whole pipeline.

/// splitmix64 finalizer (Steele, Lea & Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` of master seed `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

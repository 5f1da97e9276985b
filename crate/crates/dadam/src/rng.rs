//! Counter-based deterministic randomness.
//!
//! Every random draw in the workspace is made from a stream keyed by
//! `(master_seed, stream id parts...)`. Sub-seeds are derived with a
//! splitmix64-style hash chain, so draws are independent of execution order
//! and thread count, and a run is reproducible from its master seed alone.
//! (std's hashers are randomly keyed per process and cannot be used here.)

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer: a fast, well-mixed 64-bit permutation.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a master seed and a stream identifier.
///
/// Each part is folded into the state with the splitmix64 increment before
/// mixing, so `(master, [a, b])` and `(master, [b, a])` are unrelated.
pub fn subseed(master: u64, parts: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x6A09_E667_F3BC_C909);
    for &p in parts {
        state = mix(state.wrapping_add(0x9E37_79B9_7F4A_7C15) ^ mix(p));
    }
    state
}

/// A ChaCha stream for the given master seed and stream identifier.
pub fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(master, parts))
}

/// One standard-normal draw (Box–Muller; consumes two uniforms).
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    // random::<f64>() is uniform on [0, 1); shift away from 0 for the log.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

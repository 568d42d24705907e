//! Seed derivation and per-stream generators.
//!
//! All randomness flows from one master seed through [`derive`], which mixes
//! a parent seed with a path of integer tags (site index, tree index, fold,
//! replicate, ...) using the SplitMix64 finalizer. The derived seed keys a
//! ChaCha8 generator, a counter-based stream cipher, so two streams with
//! different paths are independent and any stream can be recreated without
//! replaying the others. Parallel and serial runs therefore draw identical
//! numbers.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Domain tags used in derivation paths, so that e.g. "fold 3" and "tree 3"
/// never collide.
pub mod tag {
    pub const SITE: u64 = 0x5173;
    pub const TREE: u64 = 0x7423;
    pub const FOLD: u64 = 0xf01d;
    pub const FOLDS: u64 = 0xf05d;
    pub const INIT: u64 = 0x1417;
    pub const BREED: u64 = 0xb4ee;
    pub const FITNESS: u64 = 0xf175;
    pub const ROUND: u64 = 0x4047;
    pub const REPLICATE: u64 = 0x4e91;
    pub const TRUTH: u64 = 0x7407;
    pub const PHENO: u64 = 0x9e40;
    pub const SCAN: u64 = 0x5ca4;
    pub const EMBED: u64 = 0xe4bd;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of tags.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// A generator for the stream at `path` below `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, path))
}

/// Uniform index in `0..n` drawn from a 64-bit word, so results do not
/// depend on the platform's pointer width.
#[inline]
pub fn index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.random_range(0..n as u64) as usize
}

/// Uniform real in [0, 1).
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 53 random mantissa bits
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviate (Box-Muller, one draw per call).
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - unit(rng); // (0, 1]
    let u2 = unit(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// In-place Fisher-Yates shuffle using [`index`].
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}

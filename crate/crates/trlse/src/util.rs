//! Small numeric and seeding helpers shared across the crate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Standard normal quantile function.
pub fn norm_ppf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// One standard-normal draw via inverse-CDF sampling. Deterministic for a
/// given RNG state and stable across platforms.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(1e-15..(1.0 - 1e-15));
    norm_ppf(u)
}

/// Numerically stable `ln(1 + exp(z))`.
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// SplitMix64 finalizer; used to derive independent seed streams.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over raw bytes; stable across builds, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from a base seed, a stream label, and a counter.
pub fn derive_seed(base: u64, label: &str, counter: u64) -> u64 {
    splitmix64(base ^ fnv1a(label.as_bytes()) ^ splitmix64(counter))
}

/// Stable hash of a point's coordinate bit patterns.
pub fn hash_point(x: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(x.len() * 8);
    for v in x {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// Seeded RNG for a derived stream.
pub fn stream_rng(base: u64, label: &str, counter: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(base, label, counter))
}

//! Seeded random streams.
//!
//! Every stream is xoshiro256++ seeded through SplitMix64 (the
//! `seed_from_u64` expansion of `rand_xoshiro`). Uniform doubles take the top
//! 53 bits of `next_u64` and scale by 2⁻⁵³, so the stream can be reproduced
//! outside Rust. Consumers never share a stream: each derives its own seed
//! from the root seed and a fixed tag.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type QRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> QRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the consumer named `tag` (FNV-1a of the tag mixed into the root).
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(root ^ splitmix64(h))
}

/// Uniform double in `[0, 1)`.
#[inline]
pub fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in `[lo, hi)`.
#[inline]
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Uniform index in `0..n` (n > 0), by rejection to avoid modulo bias.
pub fn index(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0);
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// Fisher–Yates shuffle driven by [`index`].
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4).map({
            let mut r = rng_from_seed(42);
            move |_| r.next_u64()
        })
        .collect();
        let mut r = rng_from_seed(42);
        let b: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ_per_tag() {
        assert_ne!(derive_seed(7, "init"), derive_seed(7, "dropout"));
        assert_eq!(derive_seed(7, "init"), derive_seed(7, "init"));
        assert_ne!(derive_seed(7, "init"), derive_seed(8, "init"));
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut r = rng_from_seed(1);
        for _ in 0..10_000 {
            let v = uniform(&mut r, -0.5, 0.25);
            assert!((-0.5..0.25).contains(&v));
            assert!(index(&mut r, 3) < 3);
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = rng_from_seed(3);
        let mut v: Vec<usize> = (0..50).collect();
        shuffle(&mut r, &mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}

//! Seed derivation for reproducible parallel generation.
//!
//! Every frame gets its own 64-bit seed derived from (master seed, frame
//! index) by a SplitMix64 chain, so frames can be synthesized in any order
//! and on any number of workers without changing a single output byte.
//! Within a frame, each pipeline stage pulls from its own ChaCha8 stream
//! keyed by a string label; stages never share a stream, so inserting a
//! draw in one stage cannot shift the draws of another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function. Bijective, passes BigCrush as a mixer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over a byte string. Used to fold stage labels into seeds.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Per-frame seed. Counter-based: depends only on the two arguments.
pub fn frame_seed(master_seed: u64, frame_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(frame_index.wrapping_mul(0x9e3779b97f4a7c15)))
}

/// Independent ChaCha8 stream for one pipeline stage of one frame.
///
/// The 256-bit key is expanded from `seed ^ fnv1a(label)` by running
/// SplitMix64 as a sequence generator, which is exactly how SplitMix64 is
/// meant to seed wider generators.
pub fn derive_stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ fnv1a64(label.as_bytes()));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn frame_seeds_do_not_collide_over_large_ranges() {
        let mut seen = HashSet::new();
        for master in [0u64, 1, 0xdeadbeef] {
            for idx in 0..50_000u64 {
                assert!(seen.insert(frame_seed(master, idx)), "collision at {master}/{idx}");
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_label_separated() {
        let mut a1 = derive_stream(42, "channel");
        let mut a2 = derive_stream(42, "channel");
        let mut b = derive_stream(42, "noise");
        let xs1: Vec<u64> = (0..8).map(|_| a1.gen()).collect();
        let xs2: Vec<u64> = (0..8).map(|_| a2.gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        assert_eq!(xs1, xs2);
        assert_ne!(xs1, ys);
    }

    #[test]
    fn neighboring_frame_streams_are_uncorrelated() {
        // Crude independence check: correlation of uniform draws from
        // adjacent frame seeds should be near zero.
        let mut r1 = derive_stream(frame_seed(7, 100), "scenario");
        let mut r2 = derive_stream(frame_seed(7, 101), "scenario");
        let n = 20_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = r1.gen();
            let y: f64 = r2.gen();
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * (sy / nf);
        let vx = sxx / nf - (sx / nf) * (sx / nf);
        let vy = syy / nf - (sy / nf) * (sy / nf);
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.03, "corr = {corr}");
    }
}

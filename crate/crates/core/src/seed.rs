//! Seed expansion.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a root
//! seed and a path of integers, e.g. `(seed, pass, root)` for a single walk.
//! Expansion folds each path element into the state with the SplitMix64
//! finalizer:
//!
//! ```text
//! s_0     = mix(root)
//! s_{i+1} = mix(s_i ^ (part_i + 0x9E3779B97F4A7C15))
//! ```
//!
//! String components (method and feature tags) enter through FNV-1a 64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands `root` along `path` into a child seed.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(root), |s, &p| mix(s ^ p.wrapping_add(GOLDEN)))
}

/// FNV-1a hash of a component tag.
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(root: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(root, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_distinct() {
        let a = derive(1, &[0, 1]);
        let b = derive(1, &[1, 0]);
        let c = derive(2, &[0, 1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive(1, &[0, 1]));
    }

    #[test]
    fn fnv_reference_value() {
        // FNV-1a 64 of "a"
        assert_eq!(tag("a"), 0xaf63_dc4c_8601_ec8c);
    }
}

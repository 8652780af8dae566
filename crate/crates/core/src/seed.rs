//! Seed fan-out.
//!
//! Every random stream in the crate is derived from one root seed plus a
//! component label and an index, so results do not depend on thread
//! scheduling or on the order in which components draw.

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
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Child seed for `(label, index)` under `root`.
pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(label)).wrapping_add(splitmix64(index)))
}

pub fn rng(root: u64, label: &str, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_indices_separate_streams() {
        let a = derive(7, "tree", 0);
        assert_eq!(a, derive(7, "tree", 0));
        assert_ne!(a, derive(7, "tree", 1));
        assert_ne!(a, derive(7, "pairs", 0));
        assert_ne!(a, derive(8, "tree", 0));
    }
}

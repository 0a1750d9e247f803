//! Stable seed derivation.
//!
//! Child seeds are built by folding each part through SplitMix64, so they
//! are identical on every platform and toolchain.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a parent seed with any number of integer parts.
pub fn derive_seed(parent: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(parent), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Stream labels so that each consumer of a run seed gets its own sequence.
pub mod stream {
    pub const NETWORK_INIT: u64 = 1;
    pub const REPLAY_SEED: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const EPISODE_RESET: u64 = 4;
    pub const SAMPLING: u64 = 5;
    pub const EVALUATION: u64 = 6;
    pub const SWEEP_TRIAL: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_values() {
        // Reference outputs of SplitMix64 for state 0 and 1.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(42, &[]), splitmix64(42));
    }

    #[test]
    fn parts_matter() {
        let a = derive_seed(1, &[2, 3]);
        assert_ne!(a, derive_seed(1, &[3, 2]));
        assert_ne!(a, derive_seed(1, &[2]));
        assert_ne!(a, derive_seed(2, &[2, 3]));
        assert_eq!(a, derive_seed(1, &[2, 3]));
    }
}

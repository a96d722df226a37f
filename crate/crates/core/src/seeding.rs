//! Deterministic seed derivation.
//!
//! Child streams (replications, rollouts, Monte Carlo trials) get their seeds
//! by folding indices into the master seed with SplitMix64. The scheme is
//! documented and stable: results are reproducible from the master seed alone
//! and independent of execution order.

/// SplitMix64 output step.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed from a master seed and an index path:
/// `derive(master, &[a, b])` folds `a`, then `b`, through SplitMix64.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for index in path {
        state = splitmix64(state ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable() {
        // Frozen values: the scheme is part of the reproducibility contract.
        assert_eq!(splitmix64(0), 0xE220A8397B1DCDAF);
        assert_eq!(derive(42, &[0, 1, 2]), derive(42, &[0, 1, 2]));
        assert_ne!(derive(42, &[0, 1]), derive(42, &[1, 0]));
        assert_ne!(derive(42, &[0]), derive(43, &[0]));
        assert_ne!(derive(42, &[]), derive(42, &[0]));
    }
}

//! Portable seeded sampling.
//!
//! Every random draw in the crate goes through [`sample_indices`], which runs a
//! partial Fisher-Yates shuffle driven by ChaCha8 (`rand_chacha`). Bounded
//! integers are produced by rejection sampling on `next_u64`, so the selected
//! indices depend only on the seed and the population size, never on the
//! platform or on `rand` version details.
//!
//! Seeds are specialised per (target, period) with [`derive_seed`], a 64-bit
//! FNV-1a hash over the base seed and the labels followed by a SplitMix64
//! finaliser.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixes a base seed with string labels into a new seed.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&seed.to_le_bytes());
    for label in labels {
        feed(&(label.len() as u64).to_le_bytes());
        feed(label.as_bytes());
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform integer in `0..bound` (`bound > 0`).
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Draws `amount` distinct indices from `0..population` uniformly without
/// replacement and returns them in ascending order.
///
/// When `amount >= population` every index is returned without consuming
/// randomness.
pub fn sample_indices(population: usize, amount: usize, seed: u64) -> Vec<usize> {
    if amount >= population {
        return (0..population).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..population).collect();
    for i in 0..amount {
        let j = i + bounded(&mut rng, (population - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(amount);
    pool.sort_unstable();
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_population_when_amount_covers_it() {
        assert_eq!(sample_indices(4, 4, 1), vec![0, 1, 2, 3]);
        assert_eq!(sample_indices(3, 10, 1), vec![0, 1, 2]);
        assert!(sample_indices(0, 3, 1).is_empty());
    }

    #[test]
    fn derived_seeds_separate_labels() {
        assert_ne!(derive_seed(7, &["casa", "t1"]), derive_seed(7, &["casa", "t2"]));
        assert_ne!(derive_seed(7, &["ab", "c"]), derive_seed(7, &["a", "bc"]));
        assert_eq!(derive_seed(7, &["casa", "t1"]), derive_seed(7, &["casa", "t1"]));
    }

    #[test]
    fn draws_are_roughly_uniform() {
        let mut hits = [0usize; 10];
        for seed in 0..2000 {
            for i in sample_indices(10, 3, seed) {
                hits[i] += 1;
            }
        }
        // 600 expected per slot
        for h in hits {
            assert!((480..720).contains(&h), "{hits:?}");
        }
    }

    proptest! {
        #[test]
        fn sample_is_sorted_distinct_and_sized(pop in 0usize..300, amount in 0usize..300, seed: u64) {
            let s = sample_indices(pop, amount, seed);
            prop_assert_eq!(s.len(), amount.min(pop));
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&i| i < pop));
            prop_assert_eq!(s, sample_indices(pop, amount, seed));
        }
    }
}

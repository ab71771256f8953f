//! Stratified fold assignment and seed derivation shared by the fitting stages.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for a derived seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a master seed with a stage tag and integer coordinates (splitmix64
/// finaliser), so every task owns a reproducible stream regardless of the
/// order in which tasks run.
pub fn derive_seed(master: u64, tag: &str, coords: &[u64]) -> u64 {
    let mut h = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    for &c in coords {
        h = mix(h ^ c.wrapping_add(0x632b_e59b_d9b4_e019));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Assigns rows to `k` folds, stratified by `strata`. Rows with stratum
/// `None` are left out and reported as `None`.
///
/// Each stratum is shuffled and dealt round-robin, continuing the deal across
/// strata so fold sizes differ by at most one.
pub fn stratified_folds(strata: &[Option<usize>], k: usize, seed: u64) -> Vec<Option<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        if let Some(s) = s {
            groups.entry(*s).or_default().push(i);
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![None; strata.len()];
    let mut next = 0usize;
    for rows in groups.values_mut() {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            folds[i] = Some(next % k);
            next += 1;
        }
    }
    folds
}

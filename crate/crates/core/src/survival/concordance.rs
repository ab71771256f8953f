use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Harrell's concordance index.
///
/// A pair `(i, j)` is usable when `i` has an event and `t_j > t_i`; it is
/// concordant when `r_j < r_i` and contributes one half when the scores tie.
/// A censored patient whose time equals an event time counts as the longer
/// survivor; two events at the same time are not comparable.
///
/// Runs in `O(n log n)`.
pub fn concordance_index(times: &[f64], events: &[bool], scores: &[f64]) -> Result<f64> {
    let n = times.len();
    if events.len() != n || scores.len() != n {
        return Err(Error::Dimension(format!(
            "{} times, {} events, {} scores",
            n,
            events.len(),
            scores.len()
        )));
    }
    if n < 2 {
        return Err(Error::UndefinedConcordance);
    }
    if scores.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("concordance input".into()));
    }

    // Dense ranks of the scores, 1-based for the Fenwick tree.
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |s: f64| sorted.partition_point(|&v| v < s) + 1;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut tree = Fenwick::new(sorted.len());
    let mut inserted = 0u64;
    let (mut concordant, mut tied, mut usable) = (0u64, 0u64, 0u64);

    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        while end < n && times[order[end]].partial_cmp(&t) == Some(Ordering::Equal) {
            end += 1;
        }
        let group = &order[start..end];
        for &i in group.iter().filter(|&&i| !events[i]) {
            tree.add(rank(scores[i]));
            inserted += 1;
        }
        for &i in group {
            if events[i] {
                let r = rank(scores[i]);
                let below = tree.prefix(r - 1);
                let at = tree.prefix(r) - below;
                concordant += below;
                tied += at;
                usable += inserted;
            }
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            tree.add(rank(scores[i]));
            inserted += 1;
        }
        start = end;
    }

    if usable == 0 {
        return Err(Error::UndefinedConcordance);
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / usable as f64)
}

struct Fenwick {
    counts: Vec<u64>,
}

impl Fenwick {
    fn new(size: usize) -> Self {
        Self {
            counts: vec![0; size + 1],
        }
    }

    fn add(&mut self, mut i: usize) {
        while i < self.counts.len() {
            self.counts[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, mut i: usize) -> u64 {
        let mut total = 0;
        while i > 0 {
            total += self.counts[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct enumeration of all ordered pairs.
    fn brute_force(times: &[f64], events: &[bool], scores: &[f64]) -> Option<f64> {
        let mut num = 0.0;
        let mut usable = 0usize;
        for i in 0..times.len() {
            if !events[i] {
                continue;
            }
            for j in 0..times.len() {
                if times[j] > times[i] || (times[j] == times[i] && !events[j]) {
                    usable += 1;
                    if scores[j] < scores[i] {
                        num += 1.0;
                    } else if scores[j] == scores[i] {
                        num += 0.5;
                    }
                }
            }
        }
        (usable > 0).then(|| num / usable as f64)
    }

    #[test]
    fn perfectly_concordant() {
        let c = concordance_index(&[1.0, 2.0, 3.0], &[true, true, true], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn single_tied_pair_is_half() {
        let c = concordance_index(&[1.0, 2.0], &[true, true], &[5.0, 5.0]).unwrap();
        assert_eq!(c, 0.5);
    }

    #[test]
    fn no_usable_pairs_is_an_error() {
        let r = concordance_index(&[1.0, 2.0], &[false, false], &[1.0, 2.0]);
        assert!(matches!(r, Err(Error::UndefinedConcordance)));
        let r = concordance_index(&[2.0, 2.0], &[true, true], &[1.0, 2.0]);
        assert!(matches!(r, Err(Error::UndefinedConcordance)));
    }

    #[test]
    fn censored_tie_counts_as_longer_survivor() {
        let c = concordance_index(&[2.0, 2.0], &[true, false], &[1.0, 0.0]).unwrap();
        assert_eq!(c, 1.0);
        let c = concordance_index(&[2.0, 2.0], &[false, true], &[1.0, 0.0]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn tied_events_are_not_comparable() {
        let r = concordance_index(&[2.0, 2.0], &[true, true], &[1.0, 0.0]);
        assert!(matches!(r, Err(Error::UndefinedConcordance)));
    }

    #[test]
    fn twenty_observations_match_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() > 0.3).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = concordance_index(&times, &events, &scores).unwrap();
        assert_eq!(Some(c), brute_force(&times, &events, &scores));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
        (2usize..50).prop_flat_map(|n| {
            (
                prop::collection::vec((1u8..12).prop_map(f64::from), n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec((-4i8..4).prop_map(f64::from), n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((t, e, s) in instance()) {
            let expected = brute_force(&t, &e, &s);
            match concordance_index(&t, &e, &s) {
                Ok(c) => prop_assert_eq!(Some(c), expected),
                Err(_) => prop_assert_eq!(expected, None),
            }
        }

        #[test]
        fn negating_scores_complements((t, e, s) in instance()) {
            if let Ok(c) = concordance_index(&t, &e, &s) {
                let neg: Vec<f64> = s.iter().map(|v| -v).collect();
                let c_neg = concordance_index(&t, &e, &neg).unwrap();
                prop_assert!((c + c_neg - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn invariant_under_increasing_transform((t, e, s) in instance()) {
            if let Ok(c) = concordance_index(&t, &e, &s) {
                let transformed: Vec<f64> = s.iter().map(|v| (0.7 * v).exp() + 3.0).collect();
                prop_assert_eq!(c, concordance_index(&t, &e, &transformed).unwrap());
            }
        }
    }
}

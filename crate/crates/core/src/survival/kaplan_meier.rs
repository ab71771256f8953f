use crate::error::{Error, Result};

/// Product-limit survival curve, one step per distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    steps: Vec<(f64, f64)>,
}

impl KaplanMeier {
    /// `(event time, survival just after it)` pairs in increasing time order.
    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    /// Survival probability at `t`: the step value at the largest event time `<= t`.
    pub fn survival(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(time, _)| time <= t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].1
        }
    }
}

/// Kaplan–Meier estimate. Censorings tied with an event time stay in that
/// event's risk set.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<KaplanMeier> {
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "Kaplan-Meier needs at least one observation".into(),
        ));
    }
    if times.len() != events.len() {
        return Err(Error::Dimension(format!(
            "{} times, {} events",
            times.len(),
            events.len()
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("Kaplan-Meier times".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = times.len();
    let mut survival = 1.0;
    let mut steps = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let t = times[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| times[i] == t).count();
        let deaths = order[start..end].iter().filter(|&&i| events[i]).count();
        if deaths > 0 {
            survival *= 1.0 - deaths as f64 / at_risk as f64;
            steps.push((t, survival));
        }
        at_risk -= end - start;
        start = end;
    }
    Ok(KaplanMeier { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_censoring() {
        let km = kaplan_meier(&[1.0, 2.0, 3.0], &[true, true, true]).unwrap();
        assert!((km.survival(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.survival(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.survival(3.0), 0.0);
        assert_eq!(km.survival(0.0), 1.0);
        assert!((km.survival(2.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_censored_is_flat() {
        let km = kaplan_meier(&[1.0, 2.0], &[false, false]).unwrap();
        assert!(km.steps().is_empty());
        assert_eq!(km.survival(10.0), 1.0);
    }

    #[test]
    fn empty_input_errors() {
        assert!(kaplan_meier(&[], &[]).is_err());
    }

    #[test]
    fn hand_computed_table() {
        let t = [1., 2., 2., 3., 4., 4., 5., 6., 7., 8., 8., 9., 10., 11., 12.];
        let e = [1, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 0, 1].map(|v| v == 1);
        let km = kaplan_meier(&t, &e).unwrap();
        // risk sets: 15, 14, 12, 11, 9, 7, 6 (two deaths), 3, 1
        let table = [
            (1.0, 14.0 / 15.0),
            (2.0, 13.0 / 15.0),
            (3.0, 143.0 / 180.0),
            (4.0, 13.0 / 18.0),
            (5.0, 52.0 / 81.0),
            (7.0, 104.0 / 189.0),
            (8.0, 208.0 / 567.0),
            (10.0, 416.0 / 1701.0),
            (12.0, 0.0),
        ];
        assert_eq!(km.steps().len(), table.len());
        for (&(time, s), &(et, es)) in km.steps().iter().zip(&table) {
            assert_eq!(time, et);
            assert!((s - es).abs() < 1e-12, "S({time}) = {s}, expected {es}");
        }
        assert!((km.survival(6.5) - 52.0 / 81.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(
            data in prop::collection::vec(((1u8..20).prop_map(f64::from), any::<bool>()), 1..60)
        ) {
            let (t, e): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            let km = kaplan_meier(&t, &e).unwrap();
            let mut prev = 1.0;
            for &(_, s) in km.steps() {
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!(s <= prev);
                prev = s;
            }
        }
    }
}

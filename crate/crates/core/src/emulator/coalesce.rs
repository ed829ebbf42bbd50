use crate::parametric::ObservationSet;
use alloc::vec::Vec;

/// How repeated observations at one size are combined into a single value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CoalesceRule {
    /// Inverse-variance weighted mean.
    #[default]
    Mean,
    /// Median of the raw values; robust to occasional extreme estimates.
    Median,
}

/// One value and one variance per distinct design size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoalescedObservations {
    /// Strictly increasing.
    pub sizes: Vec<u64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Number of raw observations behind each entry.
    pub counts: Vec<usize>,
}

impl CoalescedObservations {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Smallest coalesced value.
    pub fn min_mean(&self) -> Option<f64> {
        self.means.iter().copied().reduce(f64::min)
    }

    /// The entries as an observation set, one row per size.
    pub fn to_observations(&self) -> ObservationSet {
        ObservationSet::new(self.sizes.clone(), self.means.clone(), self.variances.clone())
            .expect("coalesced entries are valid observations")
    }
}

/// Groups repeated sizes into inverse-variance weighted means with combined
/// variance `1 / sum(1 / var)`.
pub fn coalesce(obs: &ObservationSet) -> CoalescedObservations {
    coalesce_with(obs, CoalesceRule::Mean)
}

pub fn coalesce_with(obs: &ObservationSet, rule: CoalesceRule) -> CoalescedObservations {
    group(obs, |values, variances| {
        let precision: f64 = variances.iter().map(|v| 1.0 / v).sum();
        let centre = match rule {
            CoalesceRule::Mean => values.iter().zip(variances).map(|(d, v)| d / v).sum::<f64>() / precision,
            CoalesceRule::Median => median(values),
        };
        (centre, 1.0 / precision)
    })
}

/// Weighted means as in [`coalesce`] but with the combined "variance" set to
/// the summed precision `sum(1 / var)` instead of its reciprocal.
///
/// This is dimensionally wrong and grows with every repeat, so an emulator
/// built on it trusts repeated sizes less and less. Kept only so tests can
/// demonstrate that failure.
pub fn coalesce_summed_precision(obs: &ObservationSet) -> CoalescedObservations {
    group(obs, |values, variances| {
        let precision: f64 = variances.iter().map(|v| 1.0 / v).sum();
        let mean = values.iter().zip(variances).map(|(d, v)| d / v).sum::<f64>() / precision;
        (mean, precision)
    })
}

fn group(obs: &ObservationSet, mut combine: impl FnMut(&[f64], &[f64]) -> (f64, f64)) -> CoalescedObservations {
    let mut rows: Vec<(u64, f64, f64)> = obs.iter().collect();
    rows.sort_by_key(|r| r.0);
    let mut out = CoalescedObservations::default();
    let (mut values, mut variances) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < rows.len() {
        let n = rows[i].0;
        values.clear();
        variances.clear();
        while i < rows.len() && rows[i].0 == n {
            values.push(rows[i].1);
            variances.push(rows[i].2);
            i += 1;
        }
        let (m, v) = combine(&values, &variances);
        out.sizes.push(n);
        out.means.push(m);
        out.variances.push(v);
        out.counts.push(values.len());
    }
    out
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn equal_variances_average() {
        let obs = ObservationSet::new(vec![5, 5], vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let c = coalesce(&obs);
        assert_eq!((c.sizes.clone(), c.means[0], c.variances[0]), (vec![5], 2.0, 0.25));
    }

    #[test]
    fn unequal_variances_weight() {
        let obs = ObservationSet::new(vec![5, 5], vec![0.0, 4.0], vec![1.0, 4.0]).unwrap();
        let c = coalesce(&obs);
        assert!((c.means[0] - 0.8).abs() < 1e-15);
        assert!((c.variances[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn distinct_sizes_only_sort() {
        let obs = ObservationSet::new(vec![9, 2, 4], vec![0.9, 0.2, 0.4], vec![1.0, 2.0, 3.0]).unwrap();
        let c = coalesce(&obs);
        assert_eq!(c.sizes, [2, 4, 9]);
        assert_eq!(c.means, [0.2, 0.4, 0.9]);
        assert_eq!(c.variances, [2.0, 3.0, 1.0]);
    }

    #[test]
    fn median_rule_ignores_outlier() {
        let obs = ObservationSet::new(vec![1, 1, 1], vec![1.0, 1.2, 50.0], vec![1.0; 3]).unwrap();
        let c = coalesce_with(&obs, CoalesceRule::Median);
        assert_eq!(c.means[0], 1.2);
        assert!((c.variances[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn summed_precision_grows_with_repeats() {
        let obs = ObservationSet::new(vec![1; 4], vec![1.0; 4], vec![0.5; 4]).unwrap();
        assert_eq!(coalesce_summed_precision(&obs).variances[0], 8.0);
        assert_eq!(coalesce(&obs).variances[0], 0.125);
    }
}

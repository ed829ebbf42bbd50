use crate::error::{Error, Result};
use alloc::vec::Vec;

/// Noisy estimates at holdout sizes, each with a known sampling variance.
///
/// Sizes may repeat. Values are `k2` estimates for the parametric fit or
/// total-cost estimates for the emulator, depending on the consumer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    sizes: Vec<u64>,
    values: Vec<f64>,
    variances: Vec<f64>,
}

impl ObservationSet {
    pub fn new(sizes: Vec<u64>, values: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if sizes.len() != values.len() || sizes.len() != variances.len() {
            return Err(Error::domain("sizes, values and variances differ in length"));
        }
        let mut obs = Self::default();
        for ((n, v), s) in sizes.into_iter().zip(values).zip(variances) {
            obs.push(n, v, s)?;
        }
        Ok(obs)
    }

    pub fn push(&mut self, n: u64, value: f64, variance: f64) -> Result<()> {
        if n == 0 {
            return Err(Error::domain("holdout sizes start at 1"));
        }
        if !value.is_finite() {
            return Err(Error::domain("observation values must be finite"));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::domain("observation variances must be positive and finite"));
        }
        self.sizes.push(n);
        self.values.push(value);
        self.variances.push(variance);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        self.sizes
            .iter()
            .zip(&self.values)
            .zip(&self.variances)
            .map(|((&n, &v), &s)| (n, v, s))
    }

    pub fn distinct_sizes(&self) -> usize {
        let mut s = self.sizes.clone();
        s.sort_unstable();
        s.dedup();
        s.len()
    }

    pub fn max_size(&self) -> Option<u64> {
        self.sizes.iter().copied().max()
    }

    /// Copy with every value replaced, keeping sizes and variances.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.sizes.clone(), values, self.variances.clone())
    }
}

//! Sources of noisy cost estimates at a requested holdout size.

use crate::error::Result;

/// An unbiased estimate together with its sampling variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub variance: f64,
}

/// Anything that can estimate a cost quantity at holdout size `n`.
///
/// The parametric algorithm asks for `k2(n)`; the emulator asks for the total
/// cost `l(n)`. Closures returning `Result<Estimate>` implement this trait.
pub trait CostOracle {
    fn estimate(&mut self, n: u64) -> Result<Estimate>;
}

impl<F> CostOracle for F
where
    F: FnMut(u64) -> Result<Estimate>,
{
    fn estimate(&mut self, n: u64) -> Result<Estimate> {
        self(n)
    }
}

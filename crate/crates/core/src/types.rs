use alloc::vec::Vec;

/// How an optimal holdout size was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Grid,
    Root,
    Parametric,
    Emulation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::Root => "root",
            Method::Parametric => "parametric",
            Method::Emulation => "emulation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Asymptotic,
    Bootstrap,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::Asymptotic => "asymptotic",
            IntervalKind::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage, `1 - alpha`.
    pub level: f64,
    pub kind: IntervalKind,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Holdout sizes whose true cost is plausibly below the estimated minimum.
///
/// This is not a credible set for the optimum: it collects every size `n`
/// with posterior probability at least `1 - alpha` that `l(n)` undercuts
/// the posterior mean cost at the estimated optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSet {
    pub members: Vec<u64>,
    pub alpha: f64,
}

impl ErrorSet {
    pub fn contains(&self, n: u64) -> bool {
        self.members.binary_search(&n).is_ok()
    }

    /// Smallest and largest member, if any.
    pub fn range(&self) -> Option<(u64, u64)> {
        Some((*self.members.first()?, *self.members.last()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Uncertainty {
    Interval(ConfidenceInterval),
    ErrorSet(ErrorSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OhsResult {
    pub n_star: u64,
    pub min_cost: f64,
    pub method: Method,
    pub uncertainty: Option<Uncertainty>,
}

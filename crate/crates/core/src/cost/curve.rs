use crate::error::{Error, Result};
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Parameters `(a, b, c)` of the power law `k2(n) = a n^-b + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawTheta {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PowerLawTheta {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let t = Self { a, b, c };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.b > 0.0
            && self.c >= 0.0
            && self.a.is_finite()
            && self.b.is_finite()
            && self.c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain("power law requires a > 0, b > 0, c >= 0, all finite"))
        }
    }

    /// `a n^-b + c` without argument checks; `+inf` at zero.
    pub fn k2(&self, n: f64) -> f64 {
        self.a * libm::pow(n, -self.b) + self.c
    }

    /// `dk2/dn = -a b n^(-b-1)`.
    pub fn k2_prime(&self, n: f64) -> f64 {
        -self.a * self.b * libm::pow(n, -self.b - 1.0)
    }

    /// `d2k2/dn2 = a b (b+1) n^(-b-2)`.
    pub fn k2_second(&self, n: f64) -> f64 {
        self.a * self.b * (self.b + 1.0) * libm::pow(n, -self.b - 2.0)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

/// Power-law cost rate `a n^-b + c` for `n > 0`.
pub fn k2_power_law(n: f64, theta: &PowerLawTheta) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::domain("holdout size must be positive"));
    }
    Ok(theta.k2(n))
}

/// Additive bump `height * exp(-((n - center) / width)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub height: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianBump {
    pub fn new(height: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::domain("bump width must be positive"));
        }
        Ok(Self { height, center, width })
    }

    /// Bump whose height is `mass / sqrt(2 pi)` at `n = 40000`, width 8000.
    pub fn literal_height() -> Self {
        Self {
            height: 1e4 / libm::sqrt(2.0 * PI),
            center: 4e4,
            width: 8e3,
        }
    }

    /// Bump shaped as `mass` times the normal density with the given centre
    /// and width, so that its peak is `mass / (width sqrt(2 pi))`.
    pub fn normal_density(mass: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(mass / (width * libm::sqrt(2.0 * PI)), center, width)
    }

    /// `1e4` times the `N(40000, 8000^2)` density: a bump of height about 0.5
    /// that creates two local minima of the total cost.
    pub fn density_scaled() -> Self {
        Self::normal_density(1e4, 4e4, 8e3).expect("positive width")
    }

    pub fn eval(&self, n: f64) -> f64 {
        let z = (n - self.center) / self.width;
        self.height * libm::exp(-0.5 * z * z)
    }

    pub fn derivative(&self, n: f64) -> f64 {
        -self.eval(n) * (n - self.center) / (self.width * self.width)
    }
}

/// Power law plus a Gaussian bump, for `n > 0`.
pub fn k2_double_descent(n: f64, theta: &PowerLawTheta, bump: &GaussianBump) -> Result<f64> {
    if !(bump.width > 0.0) {
        return Err(Error::domain("bump width must be positive"));
    }
    Ok(k2_power_law(n, theta)? + bump.eval(n))
}

/// Piecewise-linear cost rate through `(n, k2)` knots, flat beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    knots: Vec<(f64, f64)>,
}

impl TabulatedCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::domain("tabulated curve needs at least one knot"));
        }
        if knots.iter().any(|&(n, k)| !n.is_finite() || !k.is_finite() || n < 0.0) {
            return Err(Error::domain("tabulated knots must be finite with n >= 0"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::domain("tabulated sizes must be strictly ascending"));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, n: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&(x, _)| x <= n);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let ((x0, y0), (x1, y1)) = (k[i - 1], k[i]);
        y0 + (y1 - y0) * (n - x0) / (x1 - x0)
    }
}

/// A cost-rate curve `k2(n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CostCurve {
    PowerLaw(PowerLawTheta),
    DoubleDescent { theta: PowerLawTheta, bump: GaussianBump },
    Tabulated(TabulatedCurve),
}

impl CostCurve {
    pub fn kind(&self) -> &'static str {
        match self {
            CostCurve::PowerLaw(_) => "power-law",
            CostCurve::DoubleDescent { .. } => "double-descent",
            CostCurve::Tabulated(_) => "tabulated",
        }
    }

    /// `k2(n)` for `n >= 0`; the parametric families are `+inf` at zero.
    pub fn k2(&self, n: f64) -> Result<f64> {
        if !(n >= 0.0) {
            return Err(Error::domain("holdout size must be non-negative"));
        }
        Ok(match self {
            CostCurve::PowerLaw(t) => t.k2(n),
            CostCurve::DoubleDescent { theta, bump } => theta.k2(n) + bump.eval(n),
            CostCurve::Tabulated(t) => t.eval(n),
        })
    }

    pub fn derivative(&self, n: f64) -> Result<f64> {
        match self {
            CostCurve::PowerLaw(t) => Ok(t.k2_prime(n)),
            CostCurve::DoubleDescent { theta, bump } => Ok(theta.k2_prime(n) + bump.derivative(n)),
            CostCurve::Tabulated(_) => Err(Error::Unsupported("tabulated curves have no derivative")),
        }
    }
}

use crate::cost::{stationary_point, CostParameters};
use crate::error::Result;

/// Partial derivatives with respect to `(a, b, c, k1, N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientVector {
    pub components: [f64; 5],
}

impl GradientVector {
    pub fn a(&self) -> f64 {
        self.components[0]
    }
    pub fn b(&self) -> f64 {
        self.components[1]
    }
    pub fn c(&self) -> f64 {
        self.components[2]
    }
    pub fn k1(&self) -> f64 {
        self.components[3]
    }
    pub fn n_total(&self) -> f64 {
        self.components[4]
    }
}

/// Sensitivity of the optimal holdout size to each cost parameter, by
/// implicit differentiation of `l'(n) = 0` at the continuous optimum.
///
/// With `D = b(b+1)N - b(b-1)n`:
///
/// ```text
/// dn/da  = (b N n - (b-1) n^2) / (a D)
/// dn/db  = -(N n (b ln n - 1) - n^2 ((b-1) ln n - 1)) / D
/// dn/dc  = n^(b+2) / (a D)
/// dn/dk1 = -dn/dc
/// dn/dN  = b n / D
/// ```
pub fn ohs_gradient(params: &CostParameters) -> Result<GradientVector> {
    let n = stationary_point(params)?;
    Ok(ohs_gradient_at(params, n))
}

/// [`ohs_gradient`] at a known stationary point `n`.
pub fn ohs_gradient_at(params: &CostParameters, n: f64) -> GradientVector {
    let CostParameters {
        n_total: big_n, theta, ..
    } = *params;
    let (a, b) = (theta.a, theta.b);
    let d = b * (b + 1.0) * big_n - b * (b - 1.0) * n;
    let ln_n = libm::log(n);
    let dc = libm::pow(n, b + 2.0) / (a * d);
    GradientVector {
        components: [
            (b * big_n * n - (b - 1.0) * n * n) / (a * d),
            -(big_n * n * (b * ln_n - 1.0) - n * n * ((b - 1.0) * ln_n - 1.0)) / d,
            dc,
            -dc,
            b * n / d,
        ],
    }
}

/// Sensitivity of the minimal total cost to each cost parameter.
///
/// At the optimum `l'(n) = 0`, so these are the partials of `l` with `n`
/// held fixed.
pub fn mincost_gradient(params: &CostParameters) -> Result<GradientVector> {
    let n = stationary_point(params)?;
    Ok(mincost_gradient_at(params, n))
}

/// [`mincost_gradient`] at a known stationary point `n`.
pub fn mincost_gradient_at(params: &CostParameters, n: f64) -> GradientVector {
    let CostParameters {
        n_total: big_n, theta, ..
    } = *params;
    let decay = libm::pow(n, -theta.b);
    GradientVector {
        components: [
            (big_n - n) * decay,
            -libm::log(n) * (big_n - n) * theta.a * decay,
            big_n - n,
            n,
            theta.a * decay + theta.c,
        ],
    }
}

use crate::error::{Error, Result};
use crate::parametric::CostInputs;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub se: f64,
}

impl Measured {
    pub const fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }
}

/// Population and treatment rates for aspirin prophylaxis against
/// pre-eclampsia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspreParams {
    /// Individuals served by the score before its next refit.
    pub n_total: Measured,
    /// Fraction at highest assessed risk who are treated.
    pub pi: f64,
    /// Untreated PRE rate among those not designated high-risk.
    pub pi0: Measured,
    /// Untreated PRE rate among those designated high-risk.
    pub pi1: Measured,
    /// Residual risk multiplier under aspirin.
    pub alpha_aspirin: Measured,
    /// Untreated PRE prevalence in the population.
    pub pi_pre: f64,
}

impl AspreParams {
    /// Rates derived from published guideline performance: `pi0 = 0.024`,
    /// `pi1 = 0.054`, giving `k1 ~ 0.0235`.
    pub const fn guideline() -> Self {
        Self {
            n_total: Measured::new(400_000.0, 1_500.0),
            pi: 0.1,
            pi0: Measured::new(0.024, 0.0017),
            pi1: Measured::new(0.054, 0.0076),
            alpha_aspirin: Measured::new(0.37, 0.09),
            pi_pre: 1426.0 / 57974.0,
        }
    }

    /// The rounder rates `pi0 = 0.02`, `pi1 = 0.08`.
    pub const fn rounded() -> Self {
        Self {
            pi0: Measured::new(0.02, 0.0009),
            pi1: Measured::new(0.08, 0.008),
            ..Self::guideline()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.pi) || !open_unit(self.pi_pre) {
            return Err(Error::domain("pi and pi_pre must lie in (0, 1)"));
        }
        if !(self.pi0.value > 0.0 && self.pi0.value < self.pi1.value && self.pi1.value < 1.0) {
            return Err(Error::domain("need 0 < pi0 < pi1 < 1"));
        }
        if !open_unit(self.alpha_aspirin.value) {
            return Err(Error::domain("aspirin multiplier must lie in (0, 1)"));
        }
        if !(self.n_total.value >= 2.0) {
            return Err(Error::domain("N must be at least 2"));
        }
        let ses = [self.n_total.se, self.pi0.se, self.pi1.se, self.alpha_aspirin.se];
        if ses.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::domain("standard errors must be finite and non-negative"));
        }
        Ok(())
    }

    /// Untreated prevalence implied by the two group rates,
    /// `pi0 (1 - pi) + pi1 pi`, with its propagated standard error.
    pub fn implied_prevalence(&self) -> Measured {
        let (p, q) = (self.pi, 1.0 - self.pi);
        Measured::new(
            self.pi0.value * q + self.pi1.value * p,
            libm::sqrt(q * q * self.pi0.se * self.pi0.se + p * p * self.pi1.se * self.pi1.se),
        )
    }

    /// `k1` and `N` with their standard errors, for the cost model.
    pub fn cost_inputs(&self) -> Result<CostInputs> {
        let k1 = baseline_cost_k1(self)?;
        Ok(CostInputs {
            k1: k1.value,
            k1_se: k1.se,
            n_total: self.n_total.value,
            n_total_se: self.n_total.se,
        })
    }
}

impl Default for AspreParams {
    fn default() -> Self {
        Self::guideline()
    }
}

/// Expected cases per individual under baseline care,
/// `k1 = pi0 (1 - pi) + pi1 pi alpha`, with a first-order standard error
/// treating `pi0`, `pi1` and `alpha` as independent.
pub fn baseline_cost_k1(params: &AspreParams) -> Result<Measured> {
    params.validate()?;
    let AspreParams {
        pi,
        pi0,
        pi1,
        alpha_aspirin: a,
        ..
    } = *params;
    let value = pi0.value * (1.0 - pi) + pi1.value * pi * a.value;
    let d_pi0 = (1.0 - pi) * pi0.se;
    let d_pi1 = pi * a.value * pi1.se;
    let d_a = pi1.value * pi * a.se;
    Ok(Measured::new(
        value,
        libm::sqrt(d_pi0 * d_pi0 + d_pi1 * d_pi1 + d_a * d_a),
    ))
}

/// Expected cases per individual in the intervention set when the score
/// puts PRE rate `pi1_n` into its top `pi` fraction:
/// `k2 = pi_pre - pi pi1_n (1 - alpha)`.
pub fn k2_from_sensitivity(pi1_n: f64, params: &AspreParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi1_n) {
        return Err(Error::domain("pi1(n) must lie in [0, 1]"));
    }
    Ok(params.pi_pre - params.pi * pi1_n * (1.0 - params.alpha_aspirin.value))
}

/// PRE rate outside the top `pi` fraction that keeps the population
/// prevalence at `pi_pre`.
pub fn pi0_from_sensitivity(pi1_n: f64, params: &AspreParams) -> f64 {
    (params.pi_pre - params.pi * pi1_n) / (1.0 - params.pi)
}

/// Linear map from a score's expected mean-squared error to its cost,
/// `k2 = c0 + c2 mse`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseCostMap {
    pub c0: f64,
    pub c2: f64,
}

pub fn k2_from_mse(mse: f64, map: MseCostMap) -> Result<f64> {
    if !(mse >= 0.0) || !(map.c2 >= 0.0) {
        return Err(Error::domain("mse and c2 must be non-negative"));
    }
    Ok(map.c0 + map.c2 * mse)
}

/// Least-squares `(c0, c2)` from paired `(mse, k2)` observations.
pub fn fit_mse_map(mse: &[f64], k2: &[f64]) -> Result<MseCostMap> {
    if mse.len() != k2.len() {
        return Err(Error::domain("mse and k2 differ in length"));
    }
    if mse.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: mse.len(),
        });
    }
    let n = mse.len() as f64;
    let mx = mse.iter().sum::<f64>() / n;
    let my = k2.iter().sum::<f64>() / n;
    let sxx: f64 = mse.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("mse values must not all be equal"));
    }
    let sxy: f64 = mse.iter().zip(k2).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c2 = sxy / sxx;
    Ok(MseCostMap { c0: my - c2 * mx, c2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn guideline_k1() {
        let k1 = baseline_cost_k1(&AspreParams::guideline()).unwrap();
        // 0.024 * 0.9 + 0.054 * 0.1 * 0.37
        assert!((k1.value - 0.023598).abs() < 1e-12);
        assert!((k1.value - 0.0235).abs() < 5e-4);
        assert!((k1.se - 0.0016).abs() < 0.0016 * 0.2, "{}", k1.se);
    }

    #[test]
    fn rounded_k1() {
        let k1 = baseline_cost_k1(&AspreParams::rounded()).unwrap();
        assert!((k1.value - (0.02 * 0.9 + 0.08 * 0.1 * 0.37)).abs() < 1e-15);
        assert!((k1.value - 0.02096).abs() < 1e-12);
    }

    #[test]
    fn useless_aspirin_gives_untreated_prevalence() {
        let mut p = AspreParams::guideline();
        p.alpha_aspirin.value = 1.0 - 1e-15;
        let k1 = baseline_cost_k1(&p).unwrap().value;
        assert!((k1 - p.implied_prevalence().value).abs() < 1e-12);
    }

    #[test]
    fn k1_se_matches_monte_carlo() {
        let p = AspreParams::guideline();
        let k1 = baseline_cost_k1(&p).unwrap();
        let mut r = rng::rng(11);
        let draws: alloc::vec::Vec<f64> = (0..100_000)
            .map(|_| {
                let pi0 = rng::normal(&mut r, p.pi0.value, p.pi0.se);
                let pi1 = rng::normal(&mut r, p.pi1.value, p.pi1.se);
                let a = rng::normal(&mut r, p.alpha_aspirin.value, p.alpha_aspirin.se);
                pi0 * (1.0 - p.pi) + pi1 * p.pi * a
            })
            .collect();
        let sd = libm::sqrt(crate::math::sample_variance(&draws));
        assert!((sd / k1.se - 1.0).abs() < 0.05, "{sd} vs {}", k1.se);
    }

    #[test]
    fn k2_formula_and_identity() {
        let p = AspreParams::guideline();
        assert_eq!(k2_from_sensitivity(0.0, &p).unwrap(), p.pi_pre);
        let expect = 1426.0 / 57974.0 - 0.1 * 0.123 * 0.63;
        assert!((k2_from_sensitivity(0.123, &p).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.01685).abs() < 5e-5);
        assert!(pi0_from_sensitivity(p.pi_pre / p.pi, &p).abs() < 1e-15);
        for s in [0.0, 0.03, 0.1, 0.2] {
            let back = pi0_from_sensitivity(s, &p) * (1.0 - p.pi) + s * p.pi;
            assert!((back - p.pi_pre).abs() < 1e-15);
        }
        assert!(k2_from_sensitivity(1.2, &p).is_err());
        assert!(k2_from_sensitivity(-0.1, &p).is_err());
    }

    #[test]
    fn guideline_rates_are_roughly_consistent() {
        let p = AspreParams::guideline();
        let implied = p.implied_prevalence();
        assert!((implied.value - p.pi_pre).abs() < 2.0 * implied.se);
    }

    #[test]
    fn mse_map() {
        let m = MseCostMap { c0: 0.02, c2: 3.0 };
        assert_eq!(k2_from_mse(0.0, m).unwrap(), 0.02);
        assert!(k2_from_mse(-1.0, m).is_err());
        let fit = fit_mse_map(&[0.001, 0.004], &[0.023, 0.032]).unwrap();
        assert!((fit.c2 - 3.0).abs() < 1e-9 && (fit.c0 - 0.02).abs() < 1e-12);
        assert!(matches!(
            fit_mse_map(&[0.1], &[0.2]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn rejects_inconsistent_rates() {
        let mut p = AspreParams::guideline();
        p.pi0.value = 0.06;
        assert!(baseline_cost_k1(&p).is_err());
    }
}

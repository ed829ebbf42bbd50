use crate::error::{Error, Result};

/// Drift and intervention magnitudes under which refitting on a holdout set
/// dominates both never refitting and refitting naively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceBoundInputs {
    /// Size of the drift in the true risk on the region where it occurs.
    pub gamma1: f64,
    /// Covariate mass of that region.
    pub kappa1: f64,
    /// Size of the intervention effect on the region where it acts.
    pub gamma2: f64,
    pub kappa2: f64,
    /// Lipschitz constant in time of the true risk function.
    pub alpha_lip: f64,
    /// Lipschitz constant in time of the covariate distribution, in total
    /// variation.
    pub alpha2: f64,
}

impl DominanceBoundInputs {
    /// Magnitudes must be positive and masses in `(0, 1]`. The Lipschitz
    /// constants may be zero, giving the no-drift limit.
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gamma1, self.gamma2];
        if positive.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::domain("gamma1 and gamma2 must be positive and finite"));
        }
        if [self.kappa1, self.kappa2].iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
            return Err(Error::domain("kappa1 and kappa2 must lie in (0, 1]"));
        }
        if [self.alpha_lip, self.alpha2]
            .iter()
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return Err(Error::domain("Lipschitz constants must be non-negative and finite"));
        }
        Ok(())
    }
}

/// Upper limits on the time between refits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBounds {
    /// Bound for costs measured in L1; `+inf` when nothing drifts.
    pub l1: f64,
    /// Bound for costs measured in L2, in the closed form with discriminant
    /// `A^2 + 4 alpha2 gamma^2 kappa` where `A = 2 alpha^2 + alpha2 gamma^2`.
    pub l2: f64,
}

/// Both time-horizon bounds. Each is the minimum of a drift term and an
/// intervention term of identical shape.
pub fn dominance_delta_bounds(inputs: &DominanceBoundInputs) -> Result<DeltaBounds> {
    inputs.validate()?;
    let a = inputs.alpha_lip;
    let a2 = inputs.alpha2;
    let l1_term = |gamma: f64, kappa: f64| {
        let den = 2.0 * a + gamma * a2;
        if den == 0.0 {
            f64::INFINITY
        } else {
            gamma * kappa / den
        }
    };
    // (sqrt(A^2 + B) - A) / (2 alpha^2) rewritten as B / (2 alpha^2 (sqrt(A^2 + B) + A))
    // so that small B does not cancel
    let l2_term = |gamma: f64, kappa: f64| {
        let g2 = gamma * gamma;
        let big_a = 2.0 * a * a + a2 * g2;
        let b = 4.0 * a2 * g2 * kappa;
        let den = 2.0 * a * a * (libm::sqrt(big_a * big_a + b) + big_a);
        if den == 0.0 {
            f64::INFINITY
        } else {
            b / den
        }
    };
    Ok(DeltaBounds {
        l1: l1_term(inputs.gamma1, inputs.kappa1).min(l1_term(inputs.gamma2, inputs.kappa2)),
        l2: l2_term(inputs.gamma1, inputs.kappa1).min(l2_term(inputs.gamma2, inputs.kappa2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(g1: f64, k1: f64, g2: f64, k2: f64, a: f64, a2: f64) -> DominanceBoundInputs {
        DominanceBoundInputs {
            gamma1: g1,
            kappa1: k1,
            gamma2: g2,
            kappa2: k2,
            alpha_lip: a,
            alpha2: a2,
        }
    }

    #[test]
    fn worked_value() {
        let b = dominance_delta_bounds(&inputs(0.2, 0.5, 0.3, 0.5, 1.0, 0.1)).unwrap();
        let expect = (0.1f64 / 2.02).min(0.15 / 2.03);
        assert!((b.l1 - expect).abs() < 1e-15);
        assert!((b.l1 - 0.0495).abs() < 1e-4);
    }

    #[test]
    fn symmetric_terms_coincide() {
        let b = dominance_delta_bounds(&inputs(0.4, 0.3, 0.4, 0.3, 0.7, 0.2)).unwrap();
        assert!((b.l1 - 0.4 * 0.3 / (1.4 + 0.4 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn no_drift_is_unbounded() {
        let b = dominance_delta_bounds(&inputs(0.2, 0.5, 0.3, 0.5, 0.0, 0.0)).unwrap();
        assert_eq!((b.l1, b.l2), (f64::INFINITY, f64::INFINITY));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dominance_delta_bounds(&inputs(0.0, 0.5, 0.3, 0.5, 1.0, 0.1)).is_err());
        assert!(dominance_delta_bounds(&inputs(0.2, 1.5, 0.3, 0.5, 1.0, 0.1)).is_err());
        assert!(dominance_delta_bounds(&inputs(0.2, 0.5, 0.3, 0.5, -1.0, 0.1)).is_err());
    }
}

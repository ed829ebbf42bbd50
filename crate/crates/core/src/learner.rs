//! Ridge-stabilised logistic regression fitted by iteratively reweighted
//! least squares.

use crate::error::{Error, Result};
use crate::math::{logistic, Cholesky};
use alloc::vec;
use alloc::vec::Vec;

/// Penalty on the slope coefficients (never the intercept).
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Covariates in row-major order with a binary or probabilistic response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub n_features: usize,
    pub x: Vec<f64>,
    /// Responses in `[0, 1]`.
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn push(&mut self, row: &[f64], y: f64) {
        debug_assert_eq!(row.len(), self.n_features);
        self.x.extend_from_slice(row);
        self.y.push(y);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub ridge: f64,
    pub max_iterations: usize,
    /// Stop when the penalised deviance changes by less than this, relative.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            max_iterations: 50,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Ridge penalty actually used; larger than requested after separation.
    pub ridge: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        logistic(self.linear_predictor(row))
    }

    /// Fits to the rows of `data` listed in `rows`.
    ///
    /// Separated data drive the slopes off towards infinity. When the fit
    /// fails to converge, or its linear predictor classifies every response
    /// correctly, the penalty is raised a thousandfold and the fit retried,
    /// up to a penalty of 1.
    pub fn fit(data: &Dataset, rows: &[usize], config: &LogisticConfig) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: rows.len(),
            });
        }
        let mut ridge = config.ridge.max(0.0);
        loop {
            match irls(data, rows, ridge, config) {
                Some(m) if ridge >= 1.0 || !separates(&m, data, rows) => return Ok(m),
                _ if ridge < 1.0 => {
                    let next = if ridge > 0.0 { (ridge * 1e3).min(1.0) } else { 1e-6 };
                    log::debug!("logistic fit degenerate at ridge {ridge:e}; retrying at {next:e}");
                    ridge = next;
                }
                _ => {
                    return Err(Error::FitFailure {
                        reason: "logistic regression did not converge".into(),
                        objective: f64::NAN,
                        iterations: config.max_iterations,
                    })
                }
            }
        }
    }
}

const SLOPE_LIMIT: f64 = 1e3;

/// Complete separation of binary responses by the fitted hyperplane.
fn separates(model: &LogisticModel, data: &Dataset, rows: &[usize]) -> bool {
    rows.iter().all(|&i| {
        let eta = model.linear_predictor(data.row(i));
        let y = data.y[i];
        (y == 1.0 && eta > 0.0) || (y == 0.0 && eta < 0.0)
    })
}

fn penalised_deviance(data: &Dataset, rows: &[usize], beta: &[f64], ridge: f64) -> f64 {
    let p = data.n_features;
    let mut dev = 0.0;
    for &i in rows {
        let eta = beta[0] + beta[1..].iter().zip(data.row(i)).map(|(b, x)| b * x).sum::<f64>();
        // log(1 + e^eta) - y * eta, evaluated stably
        let softplus = if eta > 0.0 {
            eta + libm::log1p(libm::exp(-eta))
        } else {
            libm::log1p(libm::exp(eta))
        };
        dev += softplus - data.y[i] * eta;
    }
    dev + 0.5 * ridge * beta[1..=p].iter().map(|b| b * b).sum::<f64>()
}

fn irls(data: &Dataset, rows: &[usize], ridge: f64, config: &LogisticConfig) -> Option<LogisticModel> {
    let p = data.n_features;
    let dim = p + 1;
    let mut beta = vec![0.0; dim];
    let ybar = rows.iter().map(|&i| data.y[i]).sum::<f64>() / rows.len() as f64;
    beta[0] = libm::log(ybar.clamp(1e-6, 1.0 - 1e-6) / (1.0 - ybar.clamp(1e-6, 1.0 - 1e-6)));
    let mut dev = penalised_deviance(data, rows, &beta, ridge);
    let mut info = vec![0.0; dim * dim];
    let mut score = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    for it in 0..config.max_iterations {
        info.iter_mut().for_each(|v| *v = 0.0);
        score.iter_mut().for_each(|v| *v = 0.0);
        for &i in rows {
            let row = data.row(i);
            z[0] = 1.0;
            z[1..].copy_from_slice(row);
            let eta = beta.iter().zip(&z).map(|(b, x)| b * x).sum::<f64>();
            let mu = logistic(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let r = data.y[i] - mu;
            for a in 0..dim {
                score[a] += r * z[a];
                let wa = w * z[a];
                for b in 0..=a {
                    info[a * dim + b] += wa * z[b];
                }
            }
        }
        for a in 1..dim {
            info[a * dim + a] += ridge;
            score[a] -= ridge * beta[a];
        }
        for a in 0..dim {
            for b in 0..a {
                info[b * dim + a] = info[a * dim + b];
            }
        }
        let chol = Cholesky::new(&info, dim)?;
        let mut step = score.clone();
        chol.solve_in_place(&mut step);
        // Newton step with halving on the penalised deviance
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let d = penalised_deviance(data, rows, &trial, ridge);
            if d.is_finite() && d <= dev {
                accepted = Some((trial, d));
                break;
            }
            t *= 0.5;
        }
        let Some((next, d)) = accepted else {
            // no descent possible: at a stationary point up to rounding
            return finished(beta, ridge, it);
        };
        let change = dev - d;
        beta = next;
        dev = d;
        if beta[1..].iter().any(|b| b.abs() > SLOPE_LIMIT) {
            return None;
        }
        if change <= config.tolerance * (dev.abs() + config.tolerance) {
            return finished(beta, ridge, it + 1);
        }
    }
    None
}

fn finished(beta: Vec<f64>, ridge: f64, iterations: usize) -> Option<LogisticModel> {
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    Some(LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        ridge,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn simulate(n: usize, beta0: f64, beta: &[f64], seed: u64) -> Dataset {
        let mut r = rng::rng(seed);
        let mut d = Dataset::new(beta.len());
        let mut row = vec![0.0; beta.len()];
        for _ in 0..n {
            row.iter_mut().for_each(|x| *x = rng::std_normal(&mut r));
            let p = logistic(beta0 + row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>());
            let y = if r.random::<f64>() < p { 1.0 } else { 0.0 };
            d.push(&row, y);
        }
        d
    }

    #[test]
    fn recovers_coefficients() {
        let truth = [0.8, -0.5, 0.0];
        let d = simulate(20_000, -0.7, &truth, 1);
        let rows: Vec<usize> = (0..d.len()).collect();
        let m = LogisticModel::fit(&d, &rows, &LogisticConfig::default()).unwrap();
        assert!((m.intercept + 0.7).abs() < 0.06, "{m:?}");
        for (b, t) in m.coefficients.iter().zip(truth) {
            assert!((b - t).abs() < 0.06, "{m:?}");
        }
    }

    #[test]
    fn score_equations_hold_at_the_fit() {
        let d = simulate(500, 0.3, &[1.0, 0.4], 2);
        let rows: Vec<usize> = (0..d.len()).collect();
        let m = LogisticModel::fit(&d, &rows, &LogisticConfig::default()).unwrap();
        // intercept is unpenalised, so residuals sum to zero
        let resid: f64 = rows.iter().map(|&i| d.y[i] - m.predict(d.row(i))).sum();
        assert!(resid.abs() < 1e-6, "{resid}");
        for j in 0..2 {
            let s: f64 = rows.iter().map(|&i| (d.y[i] - m.predict(d.row(i))) * d.row(i)[j]).sum();
            assert!((s - m.ridge * m.coefficients[j]).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn separated_data_escalate_the_penalty() {
        let mut d = Dataset::new(1);
        for i in 0..40 {
            let x = i as f64 - 19.5;
            d.push(&[x], if x > 0.0 { 1.0 } else { 0.0 });
        }
        let rows: Vec<usize> = (0..d.len()).collect();
        let m = LogisticModel::fit(&d, &rows, &LogisticConfig::default()).unwrap();
        assert!(m.ridge > DEFAULT_RIDGE, "{m:?}");
        assert!(m.coefficients[0] > 0.0 && m.coefficients[0].is_finite());
        assert!(m.predict(&[5.0]) > 0.99 && m.predict(&[-5.0]) < 0.01);
    }

    #[test]
    fn fits_on_a_subset_of_rows() {
        let d = simulate(2_000, 0.0, &[1.0], 3);
        let even: Vec<usize> = (0..d.len()).step_by(2).collect();
        let mut sub = Dataset::new(1);
        for &i in &even {
            sub.push(d.row(i), d.y[i]);
        }
        let all: Vec<usize> = (0..sub.len()).collect();
        let a = LogisticModel::fit(&d, &even, &LogisticConfig::default()).unwrap();
        let b = LogisticModel::fit(&sub, &all, &LogisticConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_rows() {
        let d = simulate(10, 0.0, &[1.0], 4);
        assert!(matches!(
            LogisticModel::fit(&d, &[0], &LogisticConfig::default()),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }
}

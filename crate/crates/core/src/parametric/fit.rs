//! Weighted nonlinear least squares for `k2(n) = a n^-b + c`.
//!
//! The fit runs Levenberg-Marquardt in unconstrained coordinates
//! `a = exp(u1)`, `b = B_MAX * logistic(u2)`, `c = softplus(u3)`, from several
//! starting points. With known variances the weighted objective is the
//! Gaussian negative log-likelihood up to constants, and the inverse
//! Gauss-Newton information at the optimum is the asymptotic covariance.

use super::ObservationSet;
use crate::cost::PowerLawTheta;
use crate::error::{Error, Result};
use crate::math::{logistic, Cholesky};
use alloc::format;
use alloc::vec::Vec;

/// Upper bound on the fitted decay exponent.
pub const B_MAX: f64 = 10.0;

const MAX_ITER: usize = 500;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitWarning {
    /// `b` ran into its upper bound.
    ExponentAtBound,
    /// `c` was driven to zero.
    AsymptoteAtZero,
    /// `a n^-b` is negligible at every observed size, so `b` is barely
    /// identified.
    DecayUnidentified,
}

/// Weighted residual summary at the fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Sum of squared standardised residuals.
    pub objective: f64,
    /// Observations minus three parameters.
    pub dof: usize,
    pub max_abs_standardized: f64,
    pub warnings: Vec<FitWarning>,
}

/// A fitted power law with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFit {
    pub theta: PowerLawTheta,
    /// Row-major 3x3 covariance of `(a, b, c)`.
    pub covariance: [f64; 9],
    pub converged: bool,
    pub iterations: usize,
    pub residuals: ResidualReport,
}

impl ThetaFit {
    pub fn objective(&self) -> f64 {
        self.residuals.objective
    }

    /// Standard errors of `(a, b, c)`.
    pub fn standard_errors(&self) -> [f64; 3] {
        [0, 4, 8].map(|i| libm::sqrt(self.covariance[i].max(0.0)))
    }
}

/// Fits `k2(n) = a n^-b + c` by weighted least squares with the supplied
/// variances. `init`, when given, is tried alongside the built-in starts.
pub fn fit_power_law(obs: &ObservationSet, init: Option<PowerLawTheta>) -> Result<ThetaFit> {
    let data = Prepared::new(obs)?;
    let mut starts: Vec<[f64; 3]> = Vec::new();
    if let Some(t) = init {
        t.validate()?;
        starts.push(t.to_array());
    }
    starts.extend(data.default_starts());

    let mut best: Option<Outcome> = None;
    let mut total_iter = 0;
    for start in starts {
        let out = data.levenberg_marquardt(to_unconstrained(start));
        total_iter += out.iterations;
        let better = match &best {
            None => out.objective.is_finite(),
            Some(b) => {
                out.objective < b.objective
                    || (out.converged && !b.converged && out.objective <= b.objective * (1.0 + 1e-12))
            }
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| Error::FitFailure {
        reason: "power law: no start produced a finite objective".into(),
        objective: f64::NAN,
        iterations: total_iter,
    })?;
    data.finish(best, total_iter)
}

/// Single Levenberg-Marquardt run from `start`, for refits of perturbed
/// data near a known solution.
pub fn refit_power_law(obs: &ObservationSet, start: &PowerLawTheta) -> Result<ThetaFit> {
    let data = Prepared::new(obs)?;
    let out = data.levenberg_marquardt(to_unconstrained(start.to_array()));
    let iters = out.iterations;
    data.finish(out, iters)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

fn softplus_inv(c: f64) -> f64 {
    if c > 30.0 {
        c + libm::log1p(-libm::exp(-c))
    } else {
        libm::log(libm::expm1(c.max(1e-300)))
    }
}

fn to_unconstrained([a, b, c]: [f64; 3]) -> [f64; 3] {
    let frac = (b / B_MAX).clamp(1e-12, 1.0 - 1e-12);
    [libm::log(a), libm::log(frac / (1.0 - frac)), softplus_inv(c.max(1e-12))]
}

fn from_unconstrained(u: &[f64; 3]) -> [f64; 3] {
    [libm::exp(u[0]), B_MAX * logistic(u[1]), softplus(u[2])]
}

struct Outcome {
    u: [f64; 3],
    objective: f64,
    iterations: usize,
    converged: bool,
}

struct Prepared {
    ln_n: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Prepared {
    fn new(obs: &ObservationSet) -> Result<Self> {
        let distinct = obs.distinct_sizes();
        if distinct < 3 {
            return Err(Error::InsufficientData {
                needed: 3,
                got: distinct,
            });
        }
        Ok(Self {
            ln_n: obs.sizes().iter().map(|&n| libm::log(n as f64)).collect(),
            y: obs.values().to_vec(),
            w: obs.variances().iter().map(|&v| 1.0 / libm::sqrt(v)).collect(),
        })
    }

    fn objective(&self, p: &[f64; 3]) -> f64 {
        let [a, b, c] = *p;
        let mut s = 0.0;
        for i in 0..self.y.len() {
            let r = (self.y[i] - a * libm::exp(-b * self.ln_n[i]) - c) * self.w[i];
            s += r * r;
        }
        s
    }

    /// Objective, `J^T J` and `J^T r` in unconstrained coordinates.
    fn linearise(&self, u: &[f64; 3]) -> (f64, [f64; 9], [f64; 3]) {
        let [a, b, _] = from_unconstrained(u);
        let c = softplus(u[2]);
        let chain = [a, b * (1.0 - b / B_MAX), logistic(u[2])];
        let mut jtj = [0.0; 9];
        let mut jtr = [0.0; 3];
        let mut obj = 0.0;
        for i in 0..self.y.len() {
            let p = libm::exp(-b * self.ln_n[i]);
            let w = self.w[i];
            let r = (self.y[i] - a * p - c) * w;
            // J = dr/du = -w df/du
            let j = [-w * p * chain[0], w * a * self.ln_n[i] * p * chain[1], -w * chain[2]];
            obj += r * r;
            for k in 0..3 {
                jtr[k] += j[k] * r;
                for l in 0..=k {
                    jtj[k * 3 + l] += j[k] * j[l];
                }
            }
        }
        for k in 0..3 {
            for l in 0..k {
                jtj[l * 3 + k] = jtj[k * 3 + l];
            }
        }
        (obj, jtj, jtr)
    }

    fn levenberg_marquardt(&self, mut u: [f64; 3]) -> Outcome {
        u[1] = u[1].clamp(-40.0, 40.0);
        let mut lambda = 1e-3;
        let mut iterations = 0;
        let mut converged = false;
        let (mut obj, mut jtj, mut jtr) = self.linearise(&u);
        if !obj.is_finite() {
            return Outcome {
                u,
                objective: f64::INFINITY,
                iterations,
                converged,
            };
        }
        'outer: while iterations < MAX_ITER {
            iterations += 1;
            if obj == 0.0 {
                converged = true;
                break;
            }
            let max_diag = jtj[0].max(jtj[4]).max(jtj[8]);
            loop {
                let mut m = jtj;
                for k in 0..3 {
                    m[k * 4] += lambda * jtj[k * 4].max(1e-12 * max_diag).max(1e-300);
                }
                let mut step = [-jtr[0], -jtr[1], -jtr[2]];
                let solved = match Cholesky::new(&m, 3) {
                    Some(ch) => {
                        ch.solve_in_place(&mut step);
                        step.iter().all(|s| s.is_finite())
                    }
                    None => false,
                };
                if solved {
                    let mut cand = [u[0] + step[0], u[1] + step[1], u[2] + step[2]];
                    cand[1] = cand[1].clamp(-40.0, 40.0);
                    let new_obj = self.objective(&from_unconstrained(&cand));
                    if new_obj.is_finite() && new_obj < obj {
                        let decrease = obj - new_obj;
                        let step_norm = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
                        let u_norm = u.iter().fold(0.0f64, |m, s| m.max(s.abs()));
                        u = cand;
                        (obj, jtj, jtr) = self.linearise(&u);
                        lambda = (lambda / 3.0).max(1e-12);
                        if decrease <= 1e-13 * obj || step_norm <= 1e-12 * (1.0 + u_norm) {
                            converged = true;
                            break 'outer;
                        }
                        continue 'outer;
                    }
                }
                lambda *= 4.0;
                if lambda > LAMBDA_MAX {
                    // no descent at working precision: accept if stationary
                    // largest cosine between the residual and a Jacobian column
                    let root_obj = libm::sqrt(obj);
                    let cos = (0..3).fold(0.0f64, |m, k| {
                        m.max(jtr[k].abs() / (libm::sqrt(jtj[k * 4]) * root_obj).max(1e-300))
                    });
                    converged = cos <= 1e-5;
                    break 'outer;
                }
            }
        }
        Outcome {
            u,
            objective: obj,
            iterations,
            converged,
        }
    }

    /// Method-of-moments start plus perturbations of it.
    fn default_starts(&self) -> Vec<[f64; 3]> {
        let y_min = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let c0 = if y_min > 0.0 { 0.9 * y_min } else { 0.0 };
        let b0 = self.log_slope(c0).clamp(0.05, 0.9 * B_MAX);
        let cs = [c0, 0.0, c0, c0, 0.5 * y_min.max(0.0)];
        let bs = [b0, b0, 0.5 * b0, (2.0 * b0).min(0.9 * B_MAX), b0];
        cs.iter().zip(bs).map(|(&c, b)| [self.best_scale(b, c), b, c]).collect()
    }

    /// Weighted slope of `-log(y - c)` against `log n`, over points above `c`.
    fn log_slope(&self, c: f64) -> f64 {
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut count = 0;
        for i in 0..self.y.len() {
            let gap = self.y[i] - c;
            if gap > 0.0 {
                let (x, z) = (self.ln_n[i], libm::log(gap));
                // delta method weight for log(y - c)
                let wg = self.w[i] * gap;
                let w = (wg * wg).min(1e12);
                sw += w;
                sx += w * x;
                sy += w * z;
                sxx += w * x * x;
                sxy += w * x * z;
                count += 1;
            }
        }
        let denom = sw * sxx - sx * sx;
        if count < 2 || !(denom.abs() > 0.0) {
            return 1.0;
        }
        let slope = -(sw * sxy - sx * sy) / denom;
        if slope.is_finite() && slope > 0.0 {
            slope
        } else {
            1.0
        }
    }

    /// Weighted least-squares `a` for fixed `b` and `c`.
    fn best_scale(&self, b: f64, c: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.y.len() {
            let p = libm::exp(-b * self.ln_n[i]);
            let w2 = self.w[i] * self.w[i];
            num += w2 * (self.y[i] - c) * p;
            den += w2 * p * p;
        }
        let a = num / den;
        if a.is_finite() && a > 0.0 {
            a
        } else {
            let y_max = self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (y_max - c).abs().max(1e-6) * libm::exp(b * self.ln_n.iter().copied().fold(f64::INFINITY, f64::min))
        }
    }

    fn finish(&self, out: Outcome, iterations: usize) -> Result<ThetaFit> {
        let p = from_unconstrained(&out.u);
        let fail = |reason: &str| Error::FitFailure {
            reason: alloc::format!("power law: {reason}"),
            objective: out.objective,
            iterations,
        };
        if !out.converged {
            return Err(fail("optimizer did not converge from any start"));
        }
        let theta =
            PowerLawTheta::new(p[0], p[1], p[2]).map_err(|_| fail("fitted parameters left the valid region"))?;

        // information in (a, b, c), Jacobi-scaled before factorising
        let mut info = [0.0; 9];
        let mut max_abs = 0.0f64;
        let mut max_decay = 0.0f64;
        for i in 0..self.y.len() {
            let pw = libm::exp(-p[1] * self.ln_n[i]);
            let w = self.w[i];
            let g = [pw * w, -p[0] * self.ln_n[i] * pw * w, w];
            for k in 0..3 {
                for l in 0..3 {
                    info[k * 3 + l] += g[k] * g[l];
                }
            }
            max_abs = max_abs.max(((self.y[i] - p[0] * pw - p[2]) * w).abs());
            max_decay = max_decay.max(p[0] * pw * w);
        }
        let mut warnings = Vec::new();
        if p[1] > 0.99 * B_MAX {
            warnings.push(FitWarning::ExponentAtBound);
        }
        let y_scale = self.y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if p[2] < 1e-9 * y_scale {
            warnings.push(FitWarning::AsymptoteAtZero);
        }
        if max_decay < 1e-6 {
            warnings.push(FitWarning::DecayUnidentified);
        }
        let scale = [0, 4, 8].map(|i| 1.0 / libm::sqrt(info[i]));
        let mut scaled = info;
        for k in 0..3 {
            for l in 0..3 {
                scaled[k * 3 + l] *= scale[k] * scale[l];
            }
        }
        let chol = Cholesky::new(&scaled, 3)
            .filter(|_| scale.iter().all(|s| s.is_finite()))
            .ok_or_else(|| fail(&format!("information matrix is singular (warnings: {warnings:?})")))?;
        let mut covariance = chol.inverse();
        for k in 0..3 {
            for l in 0..3 {
                covariance[k * 3 + l] *= scale[k] * scale[l];
            }
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(fail("covariance is not finite"));
        }
        let mut cov = [0.0; 9];
        cov.copy_from_slice(&covariance);
        Ok(ThetaFit {
            theta,
            covariance: cov,
            converged: true,
            iterations,
            residuals: ResidualReport {
                objective: out.objective,
                dof: self.y.len().saturating_sub(3),
                max_abs_standardized: max_abs,
                warnings,
            },
        })
    }
}

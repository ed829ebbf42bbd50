use crate::error::{Error, Result};
use crate::learner::{Dataset, LogisticConfig, LogisticModel};
use crate::math::{logistic, mean, sample_variance, Cholesky};
use crate::rng::{self, substream};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Smallest cohort [`generate_cohort`] accepts.
pub const MIN_COHORT: usize = 1_000;
/// Mean risk in the top decile of true risk after calibration.
pub const TOP_DECILE_RISK: f64 = 0.123;
/// Untreated prevalence targeted by calibration.
pub const PREVALENCE: f64 = 1426.0 / 57974.0;

/// Covariates in record order. The first six are continuous; MoM columns
/// are multiples of the median.
pub const COVARIATES: [&str; 12] = [
    "age",
    "bmi",
    "map",
    "uta_pi_mom",
    "papp_a_mom",
    "plgf_mom",
    "nulliparous",
    "previous_pe",
    "chronic_hypertension",
    "family_history_pe",
    "ivf",
    "afro_caribbean",
];
const N_COV: usize = COVARIATES.len();
const N_CONTINUOUS: usize = 6;

/// Latent normal copula for the continuous block, then per-column
/// `(centre, scale)`. Age and MAP are normal; the rest are log-normal with
/// the centre as median.
const CORRELATION: [[f64; N_CONTINUOUS]; N_CONTINUOUS] = [
    [1.00, 0.10, 0.10, 0.00, 0.00, 0.00],
    [0.10, 1.00, 0.35, 0.00, 0.00, 0.00],
    [0.10, 0.35, 1.00, 0.10, 0.00, 0.00],
    [0.00, 0.00, 0.10, 1.00, -0.10, -0.20],
    [0.00, 0.00, 0.00, -0.10, 1.00, 0.30],
    [0.00, 0.00, 0.00, -0.20, 0.30, 1.00],
];
const CONTINUOUS: [(f64, f64); N_CONTINUOUS] = [
    (31.0, 5.5),
    (25.0, 0.18),
    (88.0, 8.0),
    (1.0, 0.22),
    (1.0, 0.45),
    (1.0, 0.40),
];
const LOG_NORMAL: [bool; N_CONTINUOUS] = [false, true, false, true, true, true];

const P_NULLIPAROUS: f64 = 0.45;
/// Among parous women only.
const P_PREVIOUS_PE: f64 = 0.07;
const P_CHRONIC_HT: f64 = 0.015;
const P_FAMILY_HISTORY: f64 = 0.04;
const P_IVF: f64 = 0.03;
const P_AFRO_CARIBBEAN: f64 = 0.12;

/// Log-odds weights on standardised features, before calibration.
const WEIGHTS: [f64; N_COV] = [0.22, 0.36, 0.48, 0.44, -0.22, -0.60, 0.4, 1.6, 1.6, 0.6, 0.6, 0.9];
/// Weight of the unrecorded risk factor.
const LATENT_WEIGHT: f64 = 1.5;

/// Synthetic screening population with a calibrated true PRE risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    /// Natural-scale covariates, row-major in [`COVARIATES`] order.
    pub covariates: Vec<f64>,
    /// Standardised covariates with realised outcomes, as seen by the
    /// learner.
    pub features: Dataset,
    /// Unrecorded risk factor, standard normal.
    pub latent: Vec<f64>,
    pub risk: Vec<f64>,
    pub outcome: Vec<bool>,
    /// `risk = logistic(intercept + scale * index)`.
    pub calibration: (f64, f64),
    pub seed: u64,
}

impl SyntheticCohort {
    pub fn len(&self) -> usize {
        self.risk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risk.is_empty()
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * N_COV..(i + 1) * N_COV]
    }

    /// Mean true risk among the `fraction` of the cohort at highest true
    /// risk.
    pub fn top_risk(&self, fraction: f64) -> f64 {
        let mut r = self.risk.clone();
        r.sort_by(|a, b| b.total_cmp(a));
        let k = top_count(r.len(), fraction);
        mean(&r[..k])
    }
}

fn top_count(len: usize, fraction: f64) -> usize {
    (libm::round(fraction * len as f64) as usize).clamp(1, len)
}

fn standardise(raw: &[f64], out: &mut [f64]) {
    for j in 0..N_CONTINUOUS {
        let (centre, scale) = CONTINUOUS[j];
        out[j] = if LOG_NORMAL[j] {
            libm::log(raw[j] / centre) / scale
        } else {
            (raw[j] - centre) / scale
        };
    }
    out[N_CONTINUOUS..].copy_from_slice(&raw[N_CONTINUOUS..]);
}

/// Draws `size` individuals and calibrates their risk so that prevalence is
/// [`PREVALENCE`] and the top decile by true risk has mean risk
/// [`TOP_DECILE_RISK`].
pub fn generate_cohort(size: usize, seed: u64) -> Result<SyntheticCohort> {
    if size < MIN_COHORT {
        return Err(Error::domain(format!("cohort size must be at least {MIN_COHORT}")));
    }
    let flat: Vec<f64> = CORRELATION.iter().flatten().copied().collect();
    let chol = Cholesky::new(&flat, N_CONTINUOUS).ok_or(Error::Conditioning { jitter: 0.0 })?;
    let mut r = substream(seed, 0);
    let mut covariates = Vec::with_capacity(size * N_COV);
    let mut features = Dataset::new(N_COV);
    let mut latent = Vec::with_capacity(size);
    let mut index = Vec::with_capacity(size);
    let mut z = [0.0; N_CONTINUOUS];
    let mut raw = [0.0; N_COV];
    let mut std_row = [0.0; N_COV];
    for _ in 0..size {
        z.iter_mut().for_each(|v| *v = rng::std_normal(&mut r));
        for (j, out) in raw[..N_CONTINUOUS].iter_mut().enumerate() {
            let w: f64 = (0..=j).map(|k| chol.lower(j, k) * z[k]).sum();
            let (centre, scale) = CONTINUOUS[j];
            *out = if LOG_NORMAL[j] {
                centre * libm::exp(scale * w)
            } else {
                centre + scale * w
            };
        }
        let mut flag = |p: f64| if r.random::<f64>() < p { 1.0 } else { 0.0 };
        let nulliparous = flag(P_NULLIPAROUS);
        let previous = if nulliparous > 0.0 { 0.0 } else { flag(P_PREVIOUS_PE) };
        raw[6..].copy_from_slice(&[
            nulliparous,
            previous,
            flag(P_CHRONIC_HT),
            flag(P_FAMILY_HISTORY),
            flag(P_IVF),
            flag(P_AFRO_CARIBBEAN),
        ]);
        let u = rng::std_normal(&mut r);
        standardise(&raw, &mut std_row);
        let eta = WEIGHTS.iter().zip(&std_row).map(|(w, x)| w * x).sum::<f64>() + LATENT_WEIGHT * u;
        covariates.extend_from_slice(&raw);
        features.push(&std_row, 0.0);
        latent.push(u);
        index.push(eta);
    }

    let (intercept, scale) = calibrate(&index, PREVALENCE, TOP_DECILE_RISK)?;
    let risk: Vec<f64> = index.iter().map(|e| logistic(intercept + scale * e)).collect();
    let mut draws = substream(seed, 1);
    let outcome: Vec<bool> = risk.iter().map(|&p| draws.random::<f64>() < p).collect();
    for (y, &o) in features.y.iter_mut().zip(&outcome) {
        *y = if o { 1.0 } else { 0.0 };
    }
    Ok(SyntheticCohort {
        covariates,
        features,
        latent,
        risk,
        outcome,
        calibration: (intercept, scale),
        seed,
    })
}

/// Finds `(b0, b1)` with `mean(logistic(b0 + b1 eta)) = prevalence` and the
/// top decile of `eta` averaging `top` risk.
fn calibrate(index: &[f64], prevalence: f64, top: f64) -> Result<(f64, f64)> {
    let mut sorted = index.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = top_count(sorted.len(), 0.1);
    let mean_risk =
        |b0: f64, b1: f64, xs: &[f64]| xs.iter().map(|e| logistic(b0 + b1 * e)).sum::<f64>() / xs.len() as f64;
    let spread = sorted.iter().map(|e| e.abs()).fold(0.0, f64::max);
    // intercept matching prevalence at a given scale, by Newton steps kept
    // inside a bracket; mean risk rises in b0
    let intercept = |b1: f64| {
        let centre = crate::math::logit(prevalence);
        let (mut lo, mut hi) = (centre - b1 * spread, centre + b1 * spread);
        let mut b0 = centre;
        for _ in 0..200 {
            let (mut m, mut slope) = (0.0, 0.0);
            for e in &sorted {
                let p = logistic(b0 + b1 * e);
                m += p;
                slope += p * (1.0 - p);
            }
            let gap = m / sorted.len() as f64 - prevalence;
            if gap < 0.0 {
                lo = b0;
            } else {
                hi = b0;
            }
            let newton = b0 - gap * sorted.len() as f64 / slope;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - b0).abs() < 1e-13 || hi - lo < 1e-13 {
                return next;
            }
            b0 = next;
        }
        b0
    };
    let top_at = |b1: f64| mean_risk(intercept(b1), b1, &sorted[..k]);
    let (mut lo, mut hi) = (1e-3, 20.0);
    let (t_lo, t_hi) = (top_at(lo), top_at(hi));
    if !(t_lo <= top && top <= t_hi) {
        return Err(Error::Calibration(format!(
            "top-decile risk spans [{t_lo:.4}, {t_hi:.4}], cannot reach {top}"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if top_at(mid) < top {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b1 = 0.5 * (lo + hi);
    let b0 = intercept(b1);
    let (got_mean, got_top) = (mean_risk(b0, b1, &sorted), top_at(b1));
    if (got_mean - prevalence).abs() > 1e-6 || (got_top - top).abs() > 1e-6 {
        return Err(Error::Calibration(format!(
            "reached prevalence {got_mean:.5} and top-decile risk {got_top:.5}"
        )));
    }
    Ok((b0, b1))
}

/// Mean and spread over replicates of a score's top-fraction PRE rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningCurvePoint {
    pub n: u64,
    /// Mean over replicates of `pi1(n)`.
    pub sensitivity: f64,
    /// Sample variance of `pi1(n)` across replicates; `None` for one
    /// replicate.
    pub variance: Option<f64>,
    /// Mean squared error of predicted against true risk on held-out
    /// individuals, averaged over replicates.
    pub mse: f64,
    pub replicates: usize,
}

/// Trains the logistic learner on `n` random individuals and measures, on
/// the rest of the cohort, the mean true risk among the `fraction` with the
/// highest scores.
///
/// Replicate `r` draws from substream `r` of `seed`. A training sample with
/// a single outcome class gives an uninformative score whose top fraction
/// carries the held-out mean risk.
pub fn learning_curve_sensitivity(
    cohort: &SyntheticCohort,
    n: u64,
    fraction: f64,
    replicates: usize,
    seed: u64,
) -> Result<LearningCurvePoint> {
    let size = cohort.len();
    let n_us = n as usize;
    if n < 2 || 5 * n_us > 4 * size {
        return Err(Error::domain("training size must lie in 2..=0.8 * cohort size"));
    }
    if !(fraction > 0.0 && fraction < 1.0) || replicates == 0 {
        return Err(Error::domain("need a fraction in (0, 1) and at least one replicate"));
    }
    let config = LogisticConfig::default();
    let mut sens = Vec::with_capacity(replicates);
    let mut mses = Vec::with_capacity(replicates);
    let mut in_train = vec![false; size];
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(size);
    for rep in 0..replicates {
        let train = rng::sample_indices(size, n_us, &mut substream(seed, rep as u64));
        in_train.iter_mut().for_each(|b| *b = false);
        train.iter().for_each(|&i| in_train[i] = true);
        let events = train.iter().filter(|&&i| cohort.outcome[i]).count();
        let model = if events == 0 || events == n_us {
            None
        } else {
            Some(LogisticModel::fit(&cohort.features, &train, &config)?)
        };
        let constant = events as f64 / n as f64;
        scored.clear();
        let mut sq = 0.0;
        for i in (0..size).filter(|&i| !in_train[i]) {
            let row = cohort.features.row(i);
            let (score, p) = match &model {
                Some(m) => {
                    let eta = m.linear_predictor(row);
                    (eta, logistic(eta))
                }
                None => (0.0, constant),
            };
            sq += (p - cohort.risk[i]) * (p - cohort.risk[i]);
            scored.push((score, i));
        }
        let held = scored.len();
        let pi1 = if model.is_some() {
            let k = top_count(held, fraction);
            scored.select_nth_unstable_by(k - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored[..k].iter().map(|&(_, i)| cohort.risk[i]).sum::<f64>() / k as f64
        } else {
            scored.iter().map(|&(_, i)| cohort.risk[i]).sum::<f64>() / held as f64
        };
        sens.push(pi1);
        mses.push(sq / held as f64);
    }
    Ok(LearningCurvePoint {
        n,
        sensitivity: mean(&sens),
        variance: (replicates > 1).then(|| sample_variance(&sens)),
        mse: mean(&mses),
        replicates,
    })
}

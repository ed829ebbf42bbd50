//! File formats read and written by the command-line tool.

use crate::error::{CliError, CliResult};
use crate::output::InputFile;
use ohs_core::cost::{CostCurve, CostModel, CostParameters, GaussianBump, PowerLawTheta, TabulatedCurve};
use ohs_core::emulator::{EmulationStep, GpConfig};
use ohs_core::parametric::{ObservationSet, ParametricStep, ThetaFit};
use ohs_core::{ConfidenceInterval, OhsResult, Uncertainty};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

pub fn read_json<T: DeserializeOwned>(file: &InputFile) -> CliResult<T> {
    serde_json::from_slice(&file.data).map_err(|e| CliError::Parse {
        path: file.path.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Reads a headed CSV into rows of `T`, reporting the offending line number
/// for malformed records.
pub fn read_csv<T: DeserializeOwned>(file: &InputFile, header: &[&str]) -> CliResult<Vec<T>> {
    let path = file.path.as_path();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file.data.as_slice());
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Serialises rows to CSV text with the given header.
pub fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.serialize(row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("values are serialisable");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct BumpFile {
    pub height: f64,
    pub center: f64,
    pub width: f64,
}

/// Cost parameters `N, k1, a, b, c`, optionally with a Gaussian bump on `k2`.
///
/// `a, b, c` may be left out when `k2` comes from a tabulated curve instead.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct CostFile {
    #[serde(rename = "N")]
    pub n_total: f64,
    pub k1: f64,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub bump: Option<BumpFile>,
}

impl CostFile {
    pub fn theta(&self) -> CliResult<PowerLawTheta> {
        match (self.a, self.b, self.c) {
            (Some(a), Some(b), Some(c)) => Ok(PowerLawTheta::new(a, b, c)?),
            _ => Err(CliError::Usage(
                "cost parameters need a, b and c unless --curve supplies k2".into(),
            )),
        }
    }

    pub fn params(&self) -> CliResult<CostParameters> {
        Ok(CostParameters::new(self.n_total, self.k1, self.theta()?)?)
    }

    /// The cost model, with `k2` from `curve` when one is given.
    pub fn model(&self, curve: Option<TabulatedCurve>) -> CliResult<CostModel> {
        let curve = match (curve, self.bump) {
            (Some(t), _) => CostCurve::Tabulated(t),
            (None, None) => CostCurve::PowerLaw(self.theta()?),
            (None, Some(b)) => CostCurve::DoubleDescent {
                theta: self.theta()?,
                bump: GaussianBump::new(b.height, b.center, b.width)?,
            },
        };
        Ok(CostModel::new(self.n_total, self.k1, curve)?)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObservationRow {
    pub n: u64,
    pub value: f64,
    pub variance: f64,
}

pub const OBSERVATION_HEADER: [&str; 3] = ["n", "value", "variance"];

pub fn read_observations(file: &InputFile) -> CliResult<ObservationSet> {
    let rows: Vec<ObservationRow> = read_csv(file, &OBSERVATION_HEADER)?;
    let mut obs = ObservationSet::default();
    for (i, r) in rows.iter().enumerate() {
        obs.push(r.n, r.value, r.variance).map_err(|e| CliError::Parse {
            path: file.path.clone(),
            line: i as u64 + 2,
            message: e.to_string(),
        })?;
    }
    Ok(obs)
}

pub fn observations_csv(obs: &ObservationSet) -> Vec<u8> {
    csv_bytes(
        &OBSERVATION_HEADER,
        obs.iter()
            .map(|(n, value, variance)| ObservationRow { n, value, variance }),
    )
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct CurveRow {
    pub n: f64,
    pub k2: f64,
}

pub fn read_curve(file: &InputFile) -> CliResult<Vec<CurveRow>> {
    read_csv(file, &["n", "k2"])
}

pub fn tabulated(file: &InputFile) -> CliResult<TabulatedCurve> {
    let rows = read_curve(file)?;
    TabulatedCurve::new(rows.iter().map(|r| (r.n, r.k2)).collect()).map_err(|e| CliError::input(&file.path, e))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct GpFile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k1: f64,
    #[serde(rename = "N")]
    pub n_total: f64,
    pub sigma_u2: f64,
    pub zeta: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.1
}

impl GpFile {
    pub fn config(&self) -> CliResult<GpConfig> {
        let gp = GpConfig {
            prior_theta: PowerLawTheta::new(self.a, self.b, self.c)?,
            prior_k1: self.k1,
            prior_n: self.n_total,
            sigma_u2: self.sigma_u2,
            zeta: self.zeta,
            tau: self.tau,
            alpha: self.alpha,
        };
        gp.validate()?;
        Ok(gp)
    }
}

pub const PARAMETRIC_TRACE_HEADER: [&str; 7] = [
    "iter",
    "n_acquired",
    "value",
    "variance",
    "random",
    "expected_width",
    "n_hat",
];

pub fn parametric_trace_csv(steps: &[ParametricStep]) -> Vec<u8> {
    csv_bytes(
        &PARAMETRIC_TRACE_HEADER,
        steps.iter().map(|s| {
            (
                s.iteration,
                s.n_acquired,
                s.value,
                s.variance,
                s.random,
                s.expected_width,
                s.n_hat,
            )
        }),
    )
}

pub const EMULATION_TRACE_HEADER: [&str; 7] = [
    "iter",
    "n_acquired",
    "d",
    "variance",
    "max_EI",
    "n_star",
    "mu_at_n_star",
];

pub fn emulation_trace_csv(steps: &[EmulationStep]) -> Vec<u8> {
    csv_bytes(
        &EMULATION_TRACE_HEADER,
        steps.iter().map(|s| {
            (
                s.iteration,
                s.n_acquired,
                s.d,
                s.variance,
                s.max_ei,
                s.n_star,
                s.mu_at_n_star,
            )
        }),
    )
}

pub fn interval_json(ci: &ConfidenceInterval) -> Value {
    json!({
        "lower": ci.lower,
        "upper": ci.upper,
        "level": ci.level,
        "kind": ci.kind.as_str(),
    })
}

pub fn uncertainty_json(u: &Option<Uncertainty>) -> Value {
    match u {
        None => Value::Null,
        Some(Uncertainty::Interval(ci)) => json!({ "ci": interval_json(ci) }),
        Some(Uncertainty::ErrorSet(set)) => {
            let (lo, hi) = set
                .range()
                .map_or((Value::Null, Value::Null), |(l, h)| (l.into(), h.into()));
            json!({
                "error_set": {
                    "alpha": set.alpha,
                    "lower": lo,
                    "upper": hi,
                    "members": set.members,
                }
            })
        }
    }
}

pub fn ohs_json(r: &OhsResult) -> Value {
    json!({
        "n_star": r.n_star,
        "min_cost": r.min_cost,
        "method": r.method.as_str(),
        "uncertainty": uncertainty_json(&r.uncertainty),
    })
}

/// Fitted power law with the full 5x5 covariance over `(a, b, c, k1, N)`.
pub fn theta_fit_json(fit: &ThetaFit, k1: f64, n_total: f64, cov: &[f64; 25]) -> Value {
    let rows: Vec<Vec<f64>> = cov.chunks(5).map(<[f64]>::to_vec).collect();
    json!({
        "a": fit.theta.a,
        "b": fit.theta.b,
        "c": fit.theta.c,
        "k1": k1,
        "N": n_total,
        "cov": rows,
        "converged": fit.converged,
        "objective": fit.objective(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_file(text: &str) -> InputFile {
        InputFile {
            path: "test.csv".into(),
            data: text.as_bytes().to_vec(),
        }
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let f = temp_file("n,value,variance\n10,0.5,0.01\n20,oops,0.01\n");
        match read_observations(&f) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_variance_reports_its_line() {
        let f = temp_file("n,value,variance\n10,0.5,0.01\n20,0.4,0.01\n30,0.3,-1\n");
        match read_observations(&f) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let f = temp_file("size,value,variance\n10,0.5,0.01\n");
        assert!(matches!(read_observations(&f), Err(CliError::Parse { line: 1, .. })));
    }

    #[test]
    fn observations_round_trip() {
        let obs = ObservationSet::new(vec![3, 1], vec![0.25, 1.5], vec![0.01, 0.02]).unwrap();
        let f = temp_file(std::str::from_utf8(&observations_csv(&obs)).unwrap());
        assert_eq!(read_observations(&f).unwrap(), obs);
    }

    #[test]
    fn cost_file_keys() {
        let f = temp_file(r#"{"N": 100000, "k1": 0.4, "a": 10000, "b": 1.2, "c": 0.2}"#);
        let cost: CostFile = read_json(&f).unwrap();
        assert_eq!(cost.params().unwrap().n_total, 1e5);
        assert!(cost.bump.is_none());
    }
}

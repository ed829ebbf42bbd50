use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn script(&self, name: &str, body: &str) -> PathBuf {
        let path = self.file(name, &format!("#!/bin/sh\n{body}\n"));
        Command::new("chmod").arg("+x").arg(&path).status().unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn ohs(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ohs"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "status {:?}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(str::to_string);
    let header = lines.next().unwrap();
    (header, lines.collect())
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const POWER_LAW: &str = r#"{"N": 100000, "k1": 0.4, "a": 10000, "b": 1.2, "c": 0.2}"#;

/// Noisy k2 observations from the power law above, with a fixed generator.
fn noisy_observations(count: usize) -> String {
    let mut state = 0x2545_f491_4f6c_dd1d_u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut text = String::from("n,value,variance\n");
    for _ in 0..count {
        let n = 1000 + (next() * 98_000.0) as u64;
        let sd = 0.001 + 0.019 * next();
        let z = (-2.0 * next().max(1e-300).ln()).sqrt() * (std::f64::consts::TAU * next()).cos();
        let k2 = 1e4 * (n as f64).powf(-1.2) + 0.2 + sd * z;
        text.push_str(&format!("{n},{k2},{}\n", sd * sd));
    }
    text
}

#[test]
fn ohs_finds_the_root_and_writes_the_curve() {
    let ws = Workspace::new();
    let config = ws.file("params.json", POWER_LAW);
    let out = ws.out("run");
    let output = ws.ohs(&["--out", out.to_str().unwrap(), "ohs", config.to_str().unwrap()]);
    ok(&output);

    let result = json(&out.join("ohs.json"));
    let n_star = result["n_star"].as_u64().unwrap();
    assert!((26_000..28_500).contains(&n_star), "{n_star}");
    assert_eq!(result["method"], "root");

    let (header, rows) = csv_rows(&out.join("cost_curve.csv"));
    assert_eq!(header, "n,cost");
    assert_eq!(rows.len(), 1000);
    // The root beats every grid point.
    let grid_min = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(result["min_cost"].as_f64().unwrap() <= grid_min);

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "ohs");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn grid_flag_sets_curve_rows() {
    let ws = Workspace::new();
    let config = ws.file("params.json", POWER_LAW);
    let output = ws.ohs(&["--out", "run", "--grid", "100", "ohs", config.to_str().unwrap()]);
    ok(&output);
    assert_eq!(csv_rows(&ws.out("run").join("cost_curve.csv")).1.len(), 100);
}

#[test]
fn score_that_never_pays_off_exits_2() {
    let ws = Workspace::new();
    let config = ws.file(
        "params.json",
        r#"{"N": 100000, "k1": 0.15, "a": 10000, "b": 1.2, "c": 0.2}"#,
    );
    let output = ws.ohs(&["--out", "run", "ohs", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    assert!(err.contains("error_kind=no_interior_ohs"), "{err}");
    assert!(err.contains("assumption 3"), "{err}");
    assert!(!ws.out("run").join("manifest.json").exists());
}

#[test]
fn double_descent_is_searched_exhaustively() {
    let ws = Workspace::new();
    let config = ws.file(
        "params.json",
        r#"{"N": 100000, "k1": 0.4, "a": 10000, "b": 1.2, "c": 0.2,
            "bump": {"height": 0.04, "center": 20000, "width": 4000}}"#,
    );
    let output = ws.ohs(&["--out", "run", "ohs", config.to_str().unwrap()]);
    ok(&output);
    let result = json(&ws.out("run").join("ohs.json"));
    assert_eq!(result["method"], "grid");
    assert_eq!(result["curve"], "double-descent");
}

#[test]
fn tabulated_curve_replaces_the_power_law() {
    let ws = Workspace::new();
    let config = ws.file("params.json", r#"{"N": 1000, "k1": 1.0}"#);
    let curve = ws.file("curve.csv", "n,k2\n0,2.0\n100,0.8\n400,0.5\n1000,0.45\n");
    let output = ws.ohs(&[
        "--out",
        "run",
        "ohs",
        config.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]);
    ok(&output);
    let result = json(&ws.out("run").join("ohs.json"));
    assert_eq!(result["curve"], "tabulated");
    let n = result["n_star"].as_u64().unwrap();
    assert!((1..1000).contains(&n));
}

#[test]
fn fit_parametric_reports_theta_and_intervals() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", &noisy_observations(200));
    let output = ws.ohs(&[
        "--out",
        "run",
        "fit-parametric",
        obs.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "100000",
        "--bootstrap",
        "1000",
    ]);
    ok(&output);
    let fit = json(&ws.out("run").join("fit.json"));
    for key in ["a", "b", "c", "k1", "N", "converged", "objective"] {
        assert!(fit.get(key).is_some(), "missing {key}");
    }
    let cov = fit["cov"].as_array().unwrap();
    assert_eq!(cov.len(), 5);
    assert!(cov.iter().all(|r| r.as_array().unwrap().len() == 5));

    let result = json(&ws.out("run").join("ohs.json"));
    let n_star = result["n_star"].as_f64().unwrap();
    assert!((n_star - 27_254.0).abs() < 0.1 * 27_254.0, "{n_star}");
    let ci = &result["uncertainty"]["ci"];
    assert_eq!(ci["kind"], "asymptotic");
    assert!((ci["level"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!(ci["lower"].as_f64().unwrap() <= n_star && n_star <= ci["upper"].as_f64().unwrap());
    let boot = &result["bootstrap"];
    assert_eq!(boot["replicates"], 1000);
    assert_eq!(boot["ci"]["kind"], "bootstrap");
}

#[test]
fn malformed_observations_exit_2_with_the_line() {
    let ws = Workspace::new();
    let obs = ws.file(
        "obs.csv",
        "n,value,variance\n100,0.5,0.001\n200,0.4,0.001\n300,zero,0.001\n",
    );
    let output = ws.ohs(&[
        "--out",
        "run",
        "fit-parametric",
        obs.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "1000",
    ]);
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    assert!(err.contains("error_kind=parse"), "{err}");
    assert!(err.contains("error_line=4"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn next_points_query_the_oracle_script() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", &noisy_observations(30));
    let oracle = ws.script(
        "k2.sh",
        r#"awk -v n="$1" 'BEGIN { printf "%.12f,0.0001\n", 10000 * n^-1.2 + 0.2 }'"#,
    );
    let output = ws.ohs(&[
        "--out",
        "run",
        "fit-parametric",
        obs.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "100000",
        "--next-points",
        "3",
        "--mc-draws",
        "10",
        "--oracle-cmd",
        oracle.to_str().unwrap(),
    ]);
    ok(&output);
    let (header, rows) = csv_rows(&ws.out("run").join("trace.csv"));
    assert_eq!(header, "iter,n_acquired,value,variance,random,expected_width,n_hat");
    assert_eq!(rows.len(), 3);
    assert_eq!(csv_rows(&ws.out("run").join("observations.csv")).1.len(), 33);
}

#[test]
fn next_points_without_an_oracle_is_a_usage_error() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", &noisy_observations(30));
    let output = ws.ohs(&[
        "--out",
        "run",
        "fit-parametric",
        obs.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "100000",
        "--next-points",
        "2",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("error_kind=usage"));
}

const GP: &str = r#"{"a": 10000, "b": 1.2, "c": 0.2, "k1": 0.4, "N": 100000,
    "sigma_u2": 1e7, "zeta": 5000, "tau": 0, "alpha": 0.1}"#;

const TOTAL_COST_OBS: &str =
    "n,value,variance\n5000,36264.0,100\n20000,29300.0,100\n40000,29700.0,100\n70000,31400.0,100\n";

#[test]
fn large_tau_stops_before_any_acquisition() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", TOTAL_COST_OBS);
    let gp = ws.file("gp.json", GP);
    let output = ws.ohs(&[
        "--out",
        "run",
        "emulate",
        obs.to_str().unwrap(),
        gp.to_str().unwrap(),
        "--tau",
        "1e15",
    ]);
    ok(&output);
    let (header, rows) = csv_rows(&ws.out("run").join("trace.csv"));
    assert_eq!(header, "iter,n_acquired,d,variance,max_EI,n_star,mu_at_n_star");
    assert!(rows.is_empty());
    let result = json(&ws.out("run").join("ohs.json"));
    assert_eq!(result["stopped"], "tau");
    assert_eq!(result["method"], "emulation");
    assert!(result["uncertainty"]["error_set"]["members"].is_array());

    let (header, rows) = csv_rows(&ws.out("run").join("mu_curve.csv"));
    assert_eq!(header, "n,mu,psi");
    assert_eq!(rows.len(), 1000);
}

#[test]
fn emulation_acquires_through_the_oracle() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", TOTAL_COST_OBS);
    let gp = ws.file("gp.json", GP);
    let oracle = ws.script(
        "cost.sh",
        r#"awk -v n="$1" 'BEGIN { k2 = 10000 * n^-1.2 + 0.2; printf "%.6f,100\n", 0.4 * n + k2 * (100000 - n) }'"#,
    );
    let output = ws.ohs(&[
        "--out",
        "run",
        "emulate",
        obs.to_str().unwrap(),
        gp.to_str().unwrap(),
        "--max-iter",
        "8",
        "--oracle-cmd",
        oracle.to_str().unwrap(),
    ]);
    ok(&output);
    let (_, rows) = csv_rows(&ws.out("run").join("trace.csv"));
    assert_eq!(rows.len(), 8);
    let result = json(&ws.out("run").join("ohs.json"));
    let n_star = result["n_star"].as_f64().unwrap();
    assert!((n_star - 27_254.0).abs() < 2_000.0, "{n_star}");
    assert_eq!(csv_rows(&ws.out("run").join("observations.csv")).1.len(), 12);
}

#[test]
fn failing_oracle_exits_2() {
    let ws = Workspace::new();
    let obs = ws.file("obs.csv", TOTAL_COST_OBS);
    let gp = ws.file("gp.json", GP);
    let oracle = ws.script("broken.sh", "echo nonsense");
    let output = ws.ohs(&[
        "--out",
        "run",
        "emulate",
        obs.to_str().unwrap(),
        gp.to_str().unwrap(),
        "--oracle-cmd",
        oracle.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("error_kind=oracle"));
}

fn small_dominance(ws: &Workspace, out: &str, seed: &str) -> Output {
    let config = ws.file(
        "dominance.json",
        r#"{"population_size": 2000, "epochs": 3, "holdout_size": 300}"#,
    );
    ws.ohs(&[
        "--out",
        out,
        "--seed",
        seed,
        "simulate",
        config.to_str().unwrap(),
        "--scenario",
        "dominance",
    ])
}

#[test]
fn dominance_trace_covers_every_strategy() {
    let ws = Workspace::new();
    ok(&small_dominance(&ws, "run", "3"));
    let (header, rows) = csv_rows(&ws.out("run").join("trace.csv"));
    assert_eq!(header, "t,strategy,cost");
    assert_eq!(rows.len(), 3 * 30);
    for name in ["no_update", "naive_update", "holdout_update"] {
        assert_eq!(rows.iter().filter(|r| r.contains(name)).count(), 30);
    }
    let summary = json(&ws.out("run").join("summary.json"));
    assert_eq!(summary["mean_cost_after_first_update"].as_object().unwrap().len(), 3);
}

#[test]
fn same_seed_gives_identical_checksums() {
    let ws = Workspace::new();
    ok(&small_dominance(&ws, "a", "11"));
    ok(&small_dominance(&ws, "b", "11"));
    ok(&small_dominance(&ws, "c", "12"));
    let digests = |dir: &str| -> Vec<(String, String)> {
        json(&ws.out(dir).join("manifest.json"))["artifacts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| {
                (
                    a["path"].as_str().unwrap().to_string(),
                    a["sha256"].as_str().unwrap().to_string(),
                )
            })
            .collect()
    };
    assert_eq!(digests("a"), digests("b"));
    assert_ne!(digests("a"), digests("c"));
    assert_eq!(
        fs::read(ws.out("a").join("trace.csv")).unwrap(),
        fs::read(ws.out("b").join("trace.csv")).unwrap()
    );
}

#[test]
fn cost_structure_writes_the_curve() {
    let ws = Workspace::new();
    let config = ws.file("cs.json", r#"{"grid": [50, 200, 800, 2000], "replicates": 8}"#);
    let output = ws.ohs(&[
        "--out",
        "run",
        "simulate",
        config.to_str().unwrap(),
        "--scenario",
        "cost-structure",
    ]);
    ok(&output);
    let (header, rows) = csv_rows(&ws.out("run").join("curve.csv"));
    assert_eq!(header, "n,k2_mean,k2_sd,replicates");
    assert_eq!(rows.len(), 4);
    assert!(json(&ws.out("run").join("summary.json"))["k1"].as_f64().unwrap() > 0.0);
}

#[test]
fn small_aspre_run_writes_both_summaries() {
    let ws = Workspace::new();
    let config = ws.file(
        "aspre.json",
        r#"{"algo": "both", "cohort_size": 10000, "initial_points": 8, "initial_range": [500, 6000],
            "sequential_points": 4, "mc_draws": 10, "emulation_candidates": 100}"#,
    );
    let output = ws.ohs(&[
        "--out",
        "run",
        "--seed",
        "2",
        "simulate",
        config.to_str().unwrap(),
        "--scenario",
        "aspre",
    ]);
    ok(&output);
    for algo in ["parametric", "emulation"] {
        let s = json(&ws.out("run").join(format!("summary_{algo}.json")));
        for key in ["ohs", "cost", "ci_or_error_set", "algo", "seeds"] {
            assert!(s.get(key).is_some(), "{algo}: missing {key}");
        }
        assert_eq!(s["algo"], algo);
        assert_eq!(csv_rows(&ws.out("run").join(format!("trace_{algo}.csv"))).1.len(), 4);
    }
}

#[test]
fn unknown_scenario_keys_are_rejected() {
    let ws = Workspace::new();
    let config = ws.file("bad.json", r#"{"populaton_size": 10}"#);
    let output = ws.ohs(&[
        "--out",
        "run",
        "simulate",
        config.to_str().unwrap(),
        "--scenario",
        "dominance",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn assumptions_report_each_condition() {
    let ws = Workspace::new();
    let curve = ws.file(
        "curve.csv",
        "n,k2\n100,1.7924\n1000,0.4512\n5000,0.2363\n20000,0.2069\n50000,0.2023\n",
    );
    let output = ws.ohs(&[
        "--out",
        "run",
        "assumptions",
        curve.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "100000",
    ]);
    ok(&output);
    let report = json(&ws.out("run").join("assumptions.json"));
    assert_eq!(report["all_hold"], true);
    assert_eq!(report["a3"]["crossing_m"], 5000.0);

    let rising = ws.file("rising.csv", "n,k2\n100,0.5\n1000,0.6\n5000,0.3\n20000,0.2\n");
    let output = ws.ohs(&[
        "--out",
        "run2",
        "assumptions",
        rising.to_str().unwrap(),
        "--k1",
        "0.4",
        "--n-total",
        "100000",
    ]);
    ok(&output);
    let report = json(&ws.out("run2").join("assumptions.json"));
    assert_eq!(report["a2"]["holds"], false);
    assert_eq!(report["a2"]["first_violation"], 100.0);
}

#[test]
fn bad_flags_exit_2() {
    let ws = Workspace::new();
    let output = ws.ohs(&["ohs"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("error_kind=usage"));
    ok(&ws.ohs(&["--help"]));
}

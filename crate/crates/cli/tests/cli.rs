use std::path::{Path, PathBuf};
use std::process::Command;

use entrysolve_core::{solve, DiffusionSpec, Payoff, ProblemParams};
use serde_json::Value;
use tempfile::TempDir;

const GBM: &str = "\
model.kind = gbm
model.alpha = 0.05
model.beta = 0.25
economics.r = 0.1
economics.lambda = 1
economics.p = 0.5
economics.K = 1
economics.C = 1
payoff.kind = power
payoff.theta = 0.5
";

const SIM: &str = "\
sim.x0 = 2
sim.paths = 20000
sim.seed = 11
";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn entrysolve(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entrysolve"));
    cmd.args(args).env_remove("ENTRYSOLVE_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn csv_field(text: &str, field: &str) -> f64 {
    let (_, rows) = parse_csv(text);
    rows.iter().find(|r| r[0] == field).unwrap()[1].parse().unwrap()
}

#[test]
fn solve_gbm_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", GBM);
    let out = dir.path().join("report.json");
    let run = entrysolve(&["solve", "--config", s(&cfg), "--out", s(&out), "--format", "json"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);

    let text = std::fs::read_to_string(&out).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    let x_star = report["x_star"].as_f64().unwrap();
    assert!((x_star - 5.144979).abs() < 1e-4);
    assert_eq!(report["mode"], "threshold");

    let params = ProblemParams::new(0.1, 1.0, 0.5, 1.0, 1.0, Payoff::power(0.5).unwrap()).unwrap();
    let sol = solve(&DiffusionSpec::gbm(0.05, 0.25).unwrap(), &params).unwrap();
    let c = sol.coefficients().unwrap();
    assert_eq!(x_star.to_bits(), sol.x_star().unwrap().to_bits());
    for (key, v) in [("c_i1", c.c_i1), ("d_i2", c.d_i2), ("c_a1", c.c_a1)] {
        assert_eq!(report[key].as_f64().unwrap().to_bits(), v.to_bits(), "{key}");
    }
    let d = sol.diagnostics().unwrap();
    assert_eq!(report["diagnostics"]["root_residual"].as_f64().unwrap().to_bits(), d.root_residual.to_bits());
    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(reparsed, report);

    let audit = &report["p_audit"];
    assert_eq!(audit["grid"].as_array().unwrap().len(), 5);
    assert!(audit["spread"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solve_logistic_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "logistic.conf", &GBM.replace("gbm", "logistic").replace("model.beta = 0.25", "model.beta = 0.25\nmodel.gamma = 0.2"));
    let run = entrysolve(&["solve", "--config", s(&cfg), "--format", "csv"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.starts_with("field,value\n"));
    assert!((csv_field(&run.stdout, "x_star") - 5.235711).abs() < 1e-3);
    assert!(csv_field(&run.stdout, "p_audit_spread") < 1e-5);
}

#[test]
fn json_config_by_extension_and_flag() {
    let dir = TempDir::new().unwrap();
    let json = r#"{"model": {"kind": "gbm", "alpha": 0.05, "beta": 0.25},
                   "economics": {"r": 0.1, "lambda": 1, "p": 0.5, "K": 1, "C": 1},
                   "payoff": {"kind": "saturating", "cap": 2.1, "scale": 1}}"#;
    for (name, extra) in [("cfg.json", None), ("cfg.txt", Some("--json-config"))] {
        let cfg = write(&dir, name, json);
        let mut args = vec!["solve", "--config", s(&cfg)];
        args.extend(extra);
        let run = entrysolve(&args, &[]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        let report: Value = serde_json::from_str(&run.stdout).unwrap();
        assert_eq!(report["mode"], "never_enter");
        assert!(report["x_star"].is_null());
    }
}

#[test]
fn curve_columns_and_ordering() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", GBM);
    let run = entrysolve(&["curve", "--config", s(&cfg), "--p-list", "0.8,0.6,0.4,0.2", "--points", "40"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = parse_csv(&run.stdout);
    assert_eq!(header.len(), 1 + 4 * 4);
    assert_eq!(&header[..5], ["x", "G_i_p0.8", "G_a_p0.8", "branch_lower_p0.8", "branch_upper_p0.8"]);
    assert_eq!(rows.len(), 40);
    for row in &rows {
        let g: Vec<f64> = (0..4).map(|j| row[1 + 4 * j].parse().unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{row:?}");
    }
}

#[test]
fn curve_branches_meet_at_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", GBM);
    let report = entrysolve(&["solve", "--config", s(&cfg)], &[]);
    let x_star = serde_json::from_str::<Value>(&report.stdout).unwrap()["x_star"].as_f64().unwrap();
    let (lo, hi) = (x_star.to_string(), (2.0 * x_star).to_string());
    let run = entrysolve(&["curve", "--config", s(&cfg), "--x-min", &lo, "--x-max", &hi, "--points", "2"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (_, rows) = parse_csv(&run.stdout);
    let lower: f64 = rows[0][3].parse().unwrap();
    let upper: f64 = rows[0][4].parse().unwrap();
    assert!((lower - upper).abs() < 1e-7 * lower.abs());
}

#[test]
fn curve_degenerate_range_is_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", GBM);
    let run = entrysolve(&["curve", "--config", s(&cfg), "--x-min", "2", "--x-max", "2"], &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("--x-max"), "{}", run.stderr);
}

#[test]
fn simulate_both_formulations_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", &format!("{GBM}{SIM}"));
    let run = entrysolve(&["simulate", "--config", s(&cfg), "--multipliers", "1.0"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = parse_csv(&run.stdout);
    for col in ["mean", "stderr", "n_entries_mean", "catastrophe_fraction"] {
        assert!(header.iter().any(|h| h == col), "{col}");
    }
    assert_eq!(rows.len(), 2);
    let at = |r: &Vec<String>, c: &str| -> f64 { r[header.iter().position(|h| h == c).unwrap()].parse().unwrap() };
    let z = (at(&rows[0], "mean") - at(&rows[1], "mean")).abs() / at(&rows[0], "stderr").hypot(at(&rows[1], "stderr"));
    assert!(z < 3.0, "z = {z}");
}

#[test]
fn simulate_scan_prefers_solved_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", &format!("{GBM}{SIM}sim.formulation = full\n"));
    let run = entrysolve(&["simulate", "--config", s(&cfg), "--multipliers", "0.8,1.0,1.2", "--format", "json"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(!run.stderr.contains("WARN"), "{}", run.stderr);
    let table: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert_eq!(table["base_is_optimal"][0], true);
}

#[test]
fn simulate_warns_but_succeeds_when_base_is_beaten() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", &format!("{GBM}{SIM}sim.threshold = 2.5\nsim.formulation = full\n"));
    let run = entrysolve(&["simulate", "--config", s(&cfg), "--multipliers", "1.0,2.0", "--paths", "5000"], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stderr.contains("WARN"), "{}", run.stderr);
}

#[test]
fn simulate_config_errors() {
    let dir = TempDir::new().unwrap();
    let no_sim = write(&dir, "a.conf", GBM);
    let run = entrysolve(&["simulate", "--config", s(&no_sim)], &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("sim"), "{}", run.stderr);

    let zero = write(&dir, "b.conf", &format!("{GBM}{}", SIM.replace("20000", "0")));
    let run = entrysolve(&["simulate", "--config", s(&zero)], &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("sim.paths"), "{}", run.stderr);
}

#[test]
fn config_errors_name_the_key() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (GBM.replace("economics.r = 0.1", "economics.r = -0.1"), "economics.r"),
        (GBM.replace("payoff.theta", "payoff.thetta"), "payoff.theta"),
        (format!("{GBM}economics.mu = 3\n"), "economics.mu"),
        (GBM.replace("model.kind = gbm", "model.kind = heston"), "model.kind"),
    ];
    for (text, key) in cases {
        let cfg = write(&dir, "bad.conf", &text);
        let run = entrysolve(&["solve", "--config", s(&cfg)], &[]);
        assert_eq!(run.code, 2, "{key}: {}", run.stderr);
        assert!(run.stderr.contains(key), "{key}: {}", run.stderr);
    }
    let run = entrysolve(&["solve", "--config", "/nonexistent/entrysolve.conf"], &[]);
    assert_eq!(run.code, 2);
}

#[test]
fn numeric_failure_exit_code() {
    // h = x^8 grows too fast for the resolvent to exist
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "steep.conf", &GBM.replace("payoff.theta = 0.5", "payoff.theta = 8"));
    let run = entrysolve(&["solve", "--config", s(&cfg)], &[]);
    assert_eq!(run.code, 3, "{}", run.stderr);
}

#[test]
fn log_verbosity_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "gbm.conf", GBM);
    let quiet = entrysolve(&["solve", "--config", s(&cfg)], &[]);
    assert!(!quiet.stderr.contains("DEBUG"));
    let loud = entrysolve(&["solve", "--config", s(&cfg)], &[("ENTRYSOLVE_LOG", "debug")]);
    assert_eq!(loud.code, 0);
    assert!(loud.stderr.contains("DEBUG"), "{}", loud.stderr);
}

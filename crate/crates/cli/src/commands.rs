use entrysolve_core::{
    simulate_policies, solve, solve_threshold, CurvePoint, Diagnostics, Formulation, Mode, SimConfig, StartState,
    Threshold, ThresholdScan,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_list, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, opt, CsvTable};

pub const DEFAULT_P_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Idle-start estimates within this many standard errors of the base
/// estimate do not count against the solved threshold.
const SUBOPTIMALITY_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PAudit {
    pub grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub model: String,
    pub p: f64,
    pub mode: Mode,
    pub x_star: Option<f64>,
    pub c_i1: Option<f64>,
    pub d_i2: Option<f64>,
    pub c_a1: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    /// Thresholds across success probabilities; absent when entry is never optimal.
    pub p_audit: Option<PAudit>,
}

fn check_probabilities(key: &str, ps: &[f64]) -> CliResult<()> {
    match ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(CliError::config(key, format!("probabilities must lie in [0, 1], got {p}"))),
        None => Ok(()),
    }
}

pub fn cmd_solve(cfg: &RunConfig, p_grid: Option<&str>) -> CliResult<SolveReport> {
    let grid = match p_grid {
        Some(raw) => parse_list("--p-list", raw)?,
        None => DEFAULT_P_GRID.to_vec(),
    };
    check_probabilities("--p-list", &grid)?;
    let spec = cfg.diffusion()?;
    let params = cfg.params()?;
    let solution = solve(&spec, &params)?;
    let coefficients = solution.coefficients();
    let p_audit = match solution.mode() {
        Mode::NeverEnter => None,
        Mode::Threshold => {
            let thresholds = grid
                .iter()
                .map(|&p| Ok(solve_threshold(&spec, &params.with_p(p)?)?))
                .collect::<CliResult<Vec<f64>>>()?;
            let hi = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = thresholds.iter().copied().fold(f64::INFINITY, f64::min);
            Some(PAudit { grid, thresholds, spread: hi - lo })
        }
    };
    Ok(SolveReport {
        model: format!("{:?}", cfg.model.kind).to_lowercase(),
        p: params.p,
        mode: solution.mode(),
        x_star: solution.x_star(),
        c_i1: coefficients.map(|c| c.c_i1),
        d_i2: coefficients.map(|c| c.d_i2),
        c_a1: coefficients.map(|c| c.c_a1),
        diagnostics: solution.diagnostics(),
        p_audit,
    })
}

impl SolveReport {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut t = CsvTable::new(&["field", "value"]);
        let mode = match self.mode {
            Mode::Threshold => "threshold",
            Mode::NeverEnter => "never_enter",
        };
        t.row(vec!["model".into(), self.model.clone()]);
        t.row(vec!["p".into(), num(self.p)]);
        t.row(vec!["mode".into(), mode.into()]);
        t.row(vec!["x_star".into(), opt(self.x_star)]);
        t.row(vec!["c_i1".into(), opt(self.c_i1)]);
        t.row(vec!["d_i2".into(), opt(self.d_i2)]);
        t.row(vec!["c_a1".into(), opt(self.c_a1)]);
        if let Some(d) = &self.diagnostics {
            t.row(vec!["break_even".into(), num(d.break_even)]);
            t.row(vec!["pasting_gap_value".into(), num(d.pasting_gap_value)]);
            t.row(vec!["pasting_gap_slope".into(), num(d.pasting_gap_slope)]);
            t.row(vec!["active_pasting_gap_slope".into(), num(d.active_pasting_gap_slope)]);
            t.row(vec!["growth_margin".into(), num(d.growth_margin)]);
            t.row(vec!["root_residual".into(), num(d.root_residual)]);
            t.row(vec!["threshold_identity_gap".into(), num(d.threshold_identity_gap)]);
            t.row(vec!["root_iterations".into(), d.root_iterations.to_string()]);
        }
        if let Some(a) = &self.p_audit {
            for (p, x) in a.grid.iter().zip(&a.thresholds) {
                t.row(vec![format!("x_star_p{}", num(*p)), num(*x)]);
            }
            t.row(vec!["p_audit_spread".into(), num(a.spread)]);
        }
        t.finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CurveOptions {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: usize,
    pub p_list: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub p: f64,
    pub x_star: Option<f64>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub x: Vec<f64>,
    pub series: Vec<CurveSeries>,
}

/// `G_i`, `G_a` and both idle branches on a uniform grid, for each `p`.
pub fn cmd_curve(cfg: &RunConfig, opts: &CurveOptions) -> CliResult<CurveTable> {
    let p_list = match &opts.p_list {
        Some(raw) => parse_list("--p-list", raw)?,
        None => vec![cfg.economics.p],
    };
    check_probabilities("--p-list", &p_list)?;
    if opts.points < 2 {
        return Err(CliError::config("--points", format!("need at least 2 points, got {}", opts.points)));
    }
    let spec = cfg.diffusion()?;
    let params = cfg.params()?;
    let x_max = match opts.x_max {
        Some(v) => v,
        None => 4.0 * solve(&spec, &params)?.x_star().unwrap_or(2.5),
    };
    let x_min = opts.x_min.unwrap_or(x_max / opts.points as f64);
    if !(x_min > 0.0) || !x_min.is_finite() {
        return Err(CliError::config("--x-min", format!("must be positive, got {x_min}")));
    }
    if !(x_max > x_min) || !x_max.is_finite() {
        return Err(CliError::config("--x-max", format!("must exceed x_min = {x_min}, got {x_max}")));
    }
    let n = opts.points;
    let x: Vec<f64> = (0..n).map(|k| x_min + (x_max - x_min) * k as f64 / (n - 1) as f64).collect();
    let mut series = Vec::with_capacity(p_list.len());
    for &p in &p_list {
        let solution = solve(&spec, &params.with_p(p)?)?;
        log::info!("p = {p}: mode {:?}, x* = {:?}", solution.mode(), solution.x_star());
        series.push(CurveSeries { p, x_star: solution.x_star(), points: solution.curve(&x)? });
    }
    Ok(CurveTable { x, series })
}

impl CurveTable {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut header = vec!["x".to_string()];
        for s in &self.series {
            let p = num(s.p);
            for col in ["G_i", "G_a", "branch_lower", "branch_upper"] {
                header.push(format!("{col}_p{p}"));
            }
        }
        let mut t = CsvTable::with_header(header);
        for (k, &x) in self.x.iter().enumerate() {
            let mut row = vec![num(x)];
            for s in &self.series {
                let pt = &s.points[k];
                row.extend([num(pt.idle), num(pt.active), opt(pt.branch_lower), opt(pt.branch_upper)]);
            }
            t.row(row);
        }
        t.finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub multipliers: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub multiplier: f64,
    pub formulation: Formulation,
    pub threshold: f64,
    pub start: StartState,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub n_entries_mean: f64,
    pub catastrophe_fraction: f64,
    pub entry_fee_mean: f64,
    pub truncation_discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTable {
    pub x0: f64,
    pub base_threshold: f64,
    pub seed: u64,
    pub rows: Vec<SimulationRow>,
    /// Per formulation: whether multiplier 1 is best up to noise; absent for single-policy runs.
    pub base_is_optimal: Vec<Option<bool>>,
}

pub fn cmd_simulate(cfg: &RunConfig, opts: &SimulateOptions) -> CliResult<SimulationTable> {
    let sim = cfg.sim()?;
    let multipliers = match (&opts.multipliers, &sim.multipliers) {
        (Some(raw), _) => parse_list("--multipliers", raw)?,
        (None, Some(m)) => m.clone(),
        (None, None) => vec![1.0],
    };
    if let Some(m) = multipliers.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
        return Err(CliError::config("--multipliers", format!("multipliers must be positive, got {m}")));
    }
    let (paths_key, paths) = match opts.paths {
        Some(n) => ("--paths", n),
        None => ("sim.paths", sim.paths),
    };
    if paths == 0 {
        return Err(CliError::config(paths_key, "number of paths must be positive"));
    }
    let seed = opts.seed.unwrap_or(sim.seed);
    let base_cfg = SimConfig {
        n_paths: paths,
        seed,
        dt: sim.dt,
        horizon: sim.horizon,
        discount_floor: sim.discount_floor,
        formulation: Formulation::Full,
    };
    base_cfg
        .validate()
        .map_err(|e| crate::config::attribute(e, "sim", &["dt", "horizon", "discount_floor"]))?;

    let spec = cfg.diffusion()?;
    let params = cfg.params()?;
    let base = match sim.threshold {
        Some(t) => t,
        None => solve(&spec, &params)?.x_star().ok_or_else(|| {
            CliError::config("sim.threshold", "entry is never optimal here; give a threshold to simulate")
        })?,
    };
    let policies: Vec<(Threshold, StartState)> =
        multipliers.iter().map(|m| (Threshold::Finite(m * base), sim.start)).collect();

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for formulation in sim.formulation.formulations() {
        let run = simulate_policies(&spec, &params, &policies, sim.x0, &SimConfig { formulation, ..base_cfg })?;
        let estimates = run.estimates();
        for (m, e) in multipliers.iter().zip(&estimates) {
            rows.push(SimulationRow {
                multiplier: *m,
                formulation,
                threshold: m * base,
                start: e.start,
                mean: e.mean,
                stderr: e.stderr,
                n_paths: e.n_paths,
                n_entries_mean: e.n_entries_mean,
                catastrophe_fraction: e.catastrophe_fraction,
                entry_fee_mean: e.entry_fee_mean,
                truncation_discount: e.truncation_discount,
            });
        }
        let check = (multipliers.len() > 1 && multipliers.contains(&1.0)).then(|| {
            ThresholdScan { base, multipliers: multipliers.clone(), estimates }.base_is_optimal(SUBOPTIMALITY_Z)
        });
        if check == Some(false) {
            log::warn!(
                "{formulation:?}: a scaled threshold beats the base {base} by more than {SUBOPTIMALITY_Z} standard errors"
            );
        }
        checks.push(check);
    }
    Ok(SimulationTable { x0: sim.x0, base_threshold: base, seed, rows, base_is_optimal: checks })
}

impl SimulationTable {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut t = CsvTable::new(&[
            "multiplier",
            "formulation",
            "threshold",
            "start",
            "x0",
            "mean",
            "stderr",
            "n_paths",
            "n_entries_mean",
            "catastrophe_fraction",
            "entry_fee_mean",
            "truncation_discount",
        ]);
        for r in &self.rows {
            let formulation = match r.formulation {
                Formulation::Full => "full",
                Formulation::Thinned => "thinned",
            };
            let start = match r.start {
                StartState::Idle => "idle",
                StartState::Active => "active",
            };
            t.row(vec![
                num(r.multiplier),
                formulation.into(),
                num(r.threshold),
                start.into(),
                num(self.x0),
                num(r.mean),
                num(r.stderr),
                r.n_paths.to_string(),
                num(r.n_entries_mean),
                num(r.catastrophe_fraction),
                num(r.entry_fee_mean),
                num(r.truncation_discount),
            ]);
        }
        t.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_key_value;

    fn gbm() -> RunConfig {
        RunConfig::from_entries(
            parse_key_value(
                "model.kind = gbm\nmodel.alpha = 0.05\nmodel.beta = 0.25\n\
                 economics.r = 0.1\neconomics.lambda = 1\neconomics.p = 0.5\n\
                 economics.K = 1\neconomics.C = 1\npayoff.kind = power\npayoff.theta = 0.5\n",
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn solve_report_json_is_bit_exact() {
        let report = cmd_solve(&gbm(), None).unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: SolveReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        let bits = |r: &SolveReport| {
            let d = r.diagnostics.unwrap();
            [r.x_star.unwrap(), r.c_i1.unwrap(), r.d_i2.unwrap(), r.c_a1.unwrap(), d.root_residual, d.growth_margin]
                .map(f64::to_bits)
        };
        assert_eq!(bits(&back), bits(&report));
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }

    #[test]
    fn curve_rejects_bad_grids() {
        let cfg = gbm();
        let one = CurveOptions { points: 1, ..CurveOptions::default() };
        assert!(matches!(cmd_curve(&cfg, &one), Err(CliError::Config { key, .. }) if key == "--points"));
        let neg = CurveOptions { x_min: Some(-1.0), x_max: Some(2.0), points: 3, p_list: None };
        assert!(matches!(cmd_curve(&cfg, &neg), Err(CliError::Config { key, .. }) if key == "--x-min"));
        let bad_p = CurveOptions { points: 3, p_list: Some("0.5,1.5".into()), ..CurveOptions::default() };
        assert!(matches!(cmd_curve(&cfg, &bad_p), Err(CliError::Config { key, .. }) if key == "--p-list"));
    }

    #[test]
    fn curve_default_grid_ends_at_four_thresholds() {
        let table = cmd_curve(&gbm(), &CurveOptions { points: 10, ..CurveOptions::default() }).unwrap();
        let x_star = table.series[0].x_star.unwrap();
        assert!((table.x[9] - 4.0 * x_star).abs() < 1e-12);
        assert!((table.x[0] - 0.4 * x_star).abs() < 1e-12);
    }
}

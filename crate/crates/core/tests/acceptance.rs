//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use entrysolve_core::diffusion::{log_grid, power_exponents};
use entrysolve_core::resolvent::resolvent_equation_check;
use entrysolve_core::special::{kummer_m, kummer_m_prime, tricomi_u, tricomi_u_prime};
use entrysolve_core::*;

const ALPHA: f64 = 0.05;
const BETA: f64 = 0.25;
const GAMMA: f64 = 0.2;
const R: f64 = 0.1;
const LAMBDA: f64 = 1.0;
const K: f64 = 1.0;
const C: f64 = 1.0;
const P: f64 = 0.5;
const P_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

const GBM_X_STAR: f64 = 5.144979;
const LOGISTIC_X_STAR: f64 = 5.235711;

type Outcome = std::result::Result<String, String>;
type Criterion = fn() -> Result<Outcome>;

fn gbm() -> DiffusionSpec {
    DiffusionSpec::gbm(ALPHA, BETA).unwrap()
}

fn logistic() -> DiffusionSpec {
    DiffusionSpec::logistic(ALPHA, BETA, GAMMA).unwrap()
}

fn gbm_as_custom() -> DiffusionSpec {
    DiffusionSpec::custom(|x| ALPHA * x, |x| BETA * x).unwrap()
}

fn params(p: f64) -> ProblemParams {
    ProblemParams::new(R, LAMBDA, p, K, C, Payoff::power(0.5).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gbm_threshold() -> Result<Outcome> {
    let (found, elapsed) = timed(|| -> Result<(f64, f64)> {
        let x = solve_threshold(&gbm(), &params(P))?;
        let rho = R + LAMBDA;
        let (b, a) = power_exponents(ALPHA, BETA, rho);
        let closed = ((0.5 - a) * (0.5 * BETA * BETA * b * (K + C / rho))).powi(2);
        Ok((x, closed))
    });
    let (x, closed) = found?;
    let ok = (x - GBM_X_STAR).abs() < 1e-4 && rel(x, closed) < 1e-8 && elapsed < Duration::from_secs(1);
    Ok(verdict(
        ok,
        format!("x* = {x:.9}, closed form {closed:.9} (rel {:.1e}), {elapsed:.2?}", rel(x, closed)),
    ))
}

fn logistic_threshold() -> Result<Outcome> {
    let (x, elapsed) = timed(|| solve_threshold(&logistic(), &params(P)));
    let x = x?;
    let ok = (x - LOGISTIC_X_STAR).abs() < 1e-3 && elapsed < Duration::from_secs(10);
    Ok(verdict(ok, format!("x* = {x:.9}, {elapsed:.2?}")))
}

fn p_independence() -> Result<Outcome> {
    let g = p_independence_audit(&gbm(), &params(P), &P_GRID)?;
    let l = p_independence_audit(&logistic(), &params(P), &P_GRID)?;
    Ok(verdict(g < 1e-6 && l < 1e-5, format!("spread gbm {g:.2e}, logistic {l:.2e}")))
}

fn smooth_pasting() -> Result<Outcome> {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, spec) in [("gbm", gbm()), ("logistic", logistic())] {
        let sol = solve(&spec, &params(P))?;
        let (left, right) = sol
            .idle_one_sided_slopes(1e-4)?
            .ok_or_else(|| Error::Numeric("no threshold".into()))?;
        let gap = rel(left, right);
        ok &= gap < 1e-5;
        detail.push(format!("{name} {left:.8}/{right:.8} (rel {gap:.1e})"));
    }
    Ok(verdict(ok, detail.join(", ")))
}

fn p_monotonicity() -> Result<Outcome> {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, spec) in [("gbm", gbm()), ("logistic", logistic())] {
        let x_star = solve_threshold(&spec, &params(P))?;
        let xs: Vec<f64> = (1..=100).map(|k| 4.0 * x_star * k as f64 / 100.0).collect();
        let mut curves = Vec::new();
        for p in [0.8, 0.6, 0.4, 0.2] {
            let sol = solve(&spec, &params(p))?;
            curves.push(sol.curve(&xs)?.iter().map(|c| c.idle).collect::<Vec<_>>());
        }
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for pair in curves.windows(2) {
            for (hi, lo) in pair[0].iter().zip(&pair[1]) {
                worst = worst.max(lo - hi);
                if lo - hi > 1e-9 {
                    violations += 1;
                }
            }
        }
        ok &= violations == 0;
        detail.push(format!("{name} {violations} violations (max increase {worst:.1e})"));
    }
    Ok(verdict(ok, detail.join(", ")))
}

fn five_point_derivative(f: impl Fn(f64) -> Result<f64>, x: f64) -> Result<f64> {
    let h = 1e-3 * x;
    Ok((f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h))
}

fn identity_suite() -> Result<Outcome> {
    const TOL: f64 = 1e-5;
    let h = |x: f64| x.sqrt();
    let grid = log_grid(0.05, 25.0, 50);
    let (worst, elapsed) = timed(|| -> Result<Vec<(String, [f64; 4])>> {
        let mut out = Vec::new();
        for (name, spec) in [("gbm", gbm()), ("logistic", logistic()), ("custom gbm", gbm_as_custom())] {
            let pr = params(P);
            let idle = Resolvent::new(spec.excessive_basis(pr.rho_idle())?);
            let active = Resolvent::new(spec.excessive_basis(pr.rho_active())?);
            // lemma identities, resolvent equation, wronskian, harmonicity
            let mut w = [0.0_f64; 4];
            for res in [&idle, &active] {
                for &x in &grid {
                    let d = five_point_derivative(|z| res.apply(&h, z), x)?;
                    let r = res.identity_residuals(&h, x, Some(d))?;
                    w[0] = w[0].max(r.into_iter().fold(0.0, f64::max));
                    let (hp, hf) = res.basis().harmonic_residuals(x)?;
                    w[3] = w[3].max(hp).max(hf);
                }
                w[2] = w[2].max(res.basis().wronskian_check(&grid)?);
            }
            for &x in &grid {
                let gap = resolvent_equation_check(&active, &idle, &h, x)?;
                w[1] = w[1].max(gap / active.apply(&h, x)?.abs());
            }
            out.push((name.to_string(), w));
        }
        Ok(out)
    });
    let worst = worst?;
    let ok = worst.iter().all(|(_, w)| w.iter().all(|v| *v < TOL)) && elapsed < Duration::from_secs(30);
    let detail = worst
        .iter()
        .map(|(n, w)| format!("{n} [{:.1e} {:.1e} {:.1e} {:.1e}]", w[0], w[1], w[2], w[3]))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(verdict(ok, format!("{detail}, {elapsed:.2?}")))
}

fn mc_agreement() -> Result<Outcome> {
    let spec = gbm();
    let pr = params(P);
    let (res, elapsed) = timed(|| -> Result<(bool, Vec<String>)> {
        let sol = solve(&spec, &pr)?;
        let x_star = sol.x_star().expect("threshold mode");
        let policies = [(Threshold::Finite(x_star), StartState::Idle), (Threshold::Finite(x_star), StartState::Active)];
        let mut ok = true;
        let mut worst_z = 0.0_f64;
        let mut worst_pair = 0.0_f64;
        for x0 in [2.0, x_star, 8.0] {
            let analytic = [sol.value_idle(x0)?, sol.value_active(x0)?];
            let mut by_formulation = Vec::new();
            for formulation in [Formulation::Full, Formulation::Thinned] {
                let cfg = SimConfig { n_paths: 200_000, seed: 20_240_601, formulation, ..SimConfig::default() };
                let est = simulate_policies(&spec, &pr, &policies, x0, &cfg)?.estimates();
                for (e, a) in est.iter().zip(analytic) {
                    let z = (e.mean - a).abs() / e.stderr;
                    worst_z = worst_z.max(z);
                    ok &= z < 3.0;
                }
                by_formulation.push(est);
            }
            for (f, t) in by_formulation[0].iter().zip(&by_formulation[1]) {
                let z = (f.mean - t.mean).abs() / f.stderr.hypot(t.stderr);
                worst_pair = worst_pair.max(z);
                ok &= z < 3.0;
            }
        }
        Ok((ok, vec![format!("max |MC - analytic|/se {worst_z:.2}"), format!("max full-vs-thinned z {worst_pair:.2}")]))
    });
    let (ok, detail) = res?;
    Ok(verdict(ok && elapsed < Duration::from_secs(120), format!("{}, {elapsed:.2?}", detail.join(", "))))
}

fn suboptimality_scan() -> Result<Outcome> {
    let spec = gbm();
    let pr = params(P);
    let multipliers = [0.7, 0.85, 1.0, 1.15, 1.3];
    let (scan, elapsed) = timed(|| -> Result<ThresholdScan> {
        let x_star = solve_threshold(&spec, &pr)?;
        let cfg = SimConfig { n_paths: 200_000, seed: 99, ..SimConfig::default() };
        threshold_suboptimality_scan(&spec, &pr, x_star, 2.0, &multipliers, &cfg)
    });
    let scan = scan?;
    let means = scan
        .estimates
        .iter()
        .zip(&scan.multipliers)
        .map(|(e, m)| format!("{m}:{:.5}±{:.5}", e.mean, e.stderr))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(verdict(scan.base_is_optimal(3.0) && elapsed < Duration::from_secs(180), format!("{means}, {elapsed:.2?}")))
}

fn never_enter() -> Result<Outcome> {
    let spec = gbm();
    let level = C + (R + LAMBDA) * K;
    let mut ok = true;
    let mut worst_z = f64::NEG_INFINITY;
    for cap in [0.5 * level, level] {
        let pr = ProblemParams::new(R, LAMBDA, P, K, C, Payoff::saturating(cap, 1.0)?)?;
        let sol = solve(&spec, &pr)?;
        ok &= sol.mode() == Mode::NeverEnter && sol.x_star().is_none();
        let policies: Vec<_> = [0.5, 2.0, 8.0, 32.0].iter().map(|&t| (Threshold::Finite(t), StartState::Idle)).collect();
        for formulation in [Formulation::Full, Formulation::Thinned] {
            let cfg = SimConfig { n_paths: 20_000, seed: 5, formulation, ..SimConfig::default() };
            for e in simulate_policies(&spec, &pr, &policies, 2.0, &cfg)?.estimates() {
                let z = e.mean / e.stderr;
                worst_z = worst_z.max(z);
                ok &= e.mean <= 3.0 * e.stderr;
            }
        }
    }
    Ok(verdict(ok, format!("mode never_enter, max mean/se {worst_z:.2}")))
}

fn special_functions() -> Result<Outcome> {
    const TOL: f64 = 1e-8;
    let mut worst = 0.0_f64;
    for z in [0.05, 0.5, 1.0, 2.5, 10.0, 29.0, 45.0, 120.0] {
        worst = worst.max(rel(kummer_m(1.0, 1.0, z)?, z.exp()));
        worst = worst.max(rel(kummer_m(1.0, 2.0, z)?, z.exp_m1() / z));
        for a in [0.5, 1.3, 5.6] {
            worst = worst.max(rel(tricomi_u(a, a + 1.0, z)?, z.powf(-a)));
        }
    }
    let (a, b) = (5.640538696111658, 12.881077392223316);
    for z in [0.05, 0.5, 1.6, 8.0, 25.0] {
        let dm = kummer_m_prime(a, b, z)?;
        worst = worst.max(rel(dm, five_point_derivative(|t| kummer_m(a, b, t), z)?));
        worst = worst.max(rel(dm, a / b * kummer_m(a + 1.0, b + 1.0, z)?));
        let du = tricomi_u_prime(a, b, z)?;
        worst = worst.max(rel(du, five_point_derivative(|t| tricomi_u(a, b, t), z)?));
        worst = worst.max(rel(du, -a * tricomi_u(a + 1.0, b + 1.0, z)?));
    }
    Ok(verdict(worst < TOL, format!("max rel deviation {worst:.1e}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("gbm threshold", gbm_threshold),
        ("logistic threshold", logistic_threshold),
        ("p-independence", p_independence),
        ("smooth pasting", smooth_pasting),
        ("p-monotonicity", p_monotonicity),
        ("identity suite", identity_suite),
        ("monte carlo agreement", mc_agreement),
        ("suboptimality scan", suboptimality_scan),
        ("never enter", never_enter),
        ("special functions", special_functions),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let line = match run() {
            Ok(Ok(detail)) => format!("PASS {:>2} {name}: {detail}", i + 1),
            Ok(Err(detail)) => format!("FAIL {:>2} {name}: {detail}", i + 1),
            Err(e) => format!("FAIL {:>2} {name}: {e}", i + 1),
        };
        if line.starts_with("FAIL") {
            failures += 1;
        }
        println!("{line}");
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

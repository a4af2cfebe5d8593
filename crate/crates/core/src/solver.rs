//! The free-boundary system for the entry problem.
//!
//! With `ρ_i = r + (1-p)λ`, `ρ_a = r + λ` and `h_C = h - (C + (r+λ)K)`, the
//! idle value is `c_i1 ψ_i` below the threshold `x*` and
//! `R_i h_C + d_i2 φ_i` above it. The threshold solves
//! `∫_0^{x*} ψ_a h_C m' = 0` on `x* > x_C`, where `x_C` is the break-even
//! state of `h_C`.

use serde::{Deserialize, Serialize};

use crate::diffusion::{log_grid, DiffusionSpec, ExcessiveBasis};
use crate::error::{domain, Error, Result};
use crate::numeric::{brent, QuadTol};
use crate::payoff::Payoff;
use crate::resolvent::{Resolvent, ResolventTable};

/// Economic parameters.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    /// Discount rate.
    pub r: f64,
    /// Intensity of forced exits.
    pub lambda: f64,
    /// Probability that a forced exit is a success (re-entry stays possible).
    pub p: f64,
    /// Entry cost.
    pub k: f64,
    /// Running cost while active.
    pub c: f64,
    pub payoff: Payoff,
}

impl ProblemParams {
    pub fn new(r: f64, lambda: f64, p: f64, k: f64, c: f64, payoff: Payoff) -> Result<Self> {
        let params = Self { r, lambda, p, k, c, payoff };
        params.validate()?;
        Ok(params)
    }

    /// Rates, probabilities and costs only; the payoff is not inspected.
    pub fn validate_rates(&self) -> Result<()> {
        let finite = [self.r, self.lambda, self.p, self.k, self.c].iter().all(|v| v.is_finite());
        if !finite {
            return Err(domain("economic parameters must be finite"));
        }
        if !(self.r > 0.0) {
            return Err(domain(format!("r must be positive, got {}", self.r)));
        }
        if !(self.lambda > 0.0) {
            return Err(domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(domain(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.k < 0.0 || self.c < 0.0 {
            return Err(domain(format!("K and C must be non-negative, got K = {}, C = {}", self.k, self.c)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_rates()?;
        if !(self.k > 0.0 || self.c > 0.0) {
            return Err(domain("at least one of K and C must be positive"));
        }
        if self.payoff.is_constant() {
            return Err(domain("payoff must be non-constant"));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.r, self.lambda, p, self.k, self.c, self.payoff.clone())
    }

    /// `r + (1-p)λ`.
    pub fn rho_idle(&self) -> f64 {
        self.r + (1.0 - self.p) * self.lambda
    }

    /// `r + λ`.
    pub fn rho_active(&self) -> f64 {
        self.r + self.lambda
    }

    /// `C + (r+λ)K`, the flow equivalent of the running and entry costs.
    pub fn cost_level(&self) -> f64 {
        self.c + self.rho_active() * self.k
    }

    /// `h_C(x)`.
    pub fn net_payoff(&self, x: f64) -> f64 {
        self.payoff.eval(x) - self.cost_level()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viability {
    Viable,
    NeverEnter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Threshold,
    NeverEnter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c_i1: f64,
    pub d_i2: f64,
    pub c_a1: f64,
}

/// Consistency measures of a threshold solution. Gaps are relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Break-even state `x_C`.
    pub break_even: f64,
    /// Idle branches at `x*`: value mismatch.
    pub pasting_gap_value: f64,
    /// Idle branches at `x*`: slope mismatch.
    pub pasting_gap_slope: f64,
    /// Active branches at `x*`: slope mismatch. This is the condition that pins `x*`.
    pub active_pasting_gap_slope: f64,
    /// `min (R_i h - G_i) / R_i h` over a grid around `x*`; negative means the growth bound fails.
    pub growth_margin: f64,
    /// `|∫_0^{x*} ψ_a h_C m'|`.
    pub root_residual: f64,
    /// Mismatch in `∫_0^{x*} ψ_a h m' = (K + C/(r+λ)) ψ_a'(x*)/S'(x*)`.
    pub threshold_identity_gap: f64,
    pub root_iterations: usize,
}

/// One row of a value-function curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub idle: f64,
    pub active: f64,
    /// `c_i1 ψ_i(x)` continued past `x*`.
    pub branch_lower: Option<f64>,
    /// `R_i h_C(x) + d_i2 φ_i(x)` continued below `x*`.
    pub branch_upper: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    params: ProblemParams,
    mode: Mode,
    x_star: Option<f64>,
    coefficients: Option<Coefficients>,
    diagnostics: Option<Diagnostics>,
    idle: Resolvent,
    active: Resolvent,
}

/// `NeverEnter` iff `lim h ≤ C + (r+λ)K`.
pub fn check_entry_viability(params: &ProblemParams) -> Result<Viability> {
    if params.payoff.eventually_exceeds(params.cost_level())? {
        Ok(Viability::Viable)
    } else {
        Ok(Viability::NeverEnter)
    }
}

struct ThresholdRoot {
    x_star: f64,
    break_even: f64,
    residual: f64,
    iterations: usize,
}

const ROOT_RTOL: f64 = 1e-13;
const MAX_BRACKET_DOUBLINGS: usize = 200;

fn find_threshold(active: &Resolvent, params: &ProblemParams) -> Result<ThresholdRoot> {
    let level = params.cost_level();
    let x_c = params.payoff.break_even(level)?;
    let h_c = |z: f64| params.net_payoff(z);
    let start = if x_c > 0.0 { x_c * (1.0 + 1e-9) } else { 1e-8 };
    let f_start = active.lower_integral(&h_c, start)?;
    if !(f_start < 0.0) {
        return Err(Error::Numeric(format!(
            "threshold function is not negative at the break-even state {x_c} ({f_start})"
        )));
    }
    // panels next to x_C integrate a cancelling h_C, so accuracy is judged on the scale of F
    let tol = active.tolerance();
    let active = &active.clone().with_tolerance(QuadTol::new(tol.abs.max(tol.rel * f_start.abs()), tol.rel));
    // geometric bracket expansion; F is increasing beyond x_C
    let (mut a, mut fa) = (start, f_start);
    let mut b = 2.0 * start;
    let mut fb = fa + active.lower_integral_between(&h_c, a, b)?;
    let mut doublings = 0;
    while fb <= 0.0 {
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Numeric(format!(
                "no sign change of the threshold function on [{x_c}, {b:e}] (value {fb:e})"
            )));
        }
        a = b;
        fa = fb;
        b *= 2.0;
        fb = fa + active.lower_integral_between(&h_c, a, b)?;
    }
    let root = brent(
        |x| Ok(fa + active.lower_integral_between(&h_c, a, x)?),
        a,
        b,
        0.0,
        ROOT_RTOL,
        200,
    )?;
    Ok(ThresholdRoot {
        x_star: root.root,
        break_even: x_c,
        residual: root.value.abs(),
        iterations: root.iterations,
    })
}

/// The optimal entry threshold `x*`. Depends on the economics only through `r + λ`, `K`, `C` and `h`.
pub fn solve_threshold(spec: &DiffusionSpec, params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    if check_entry_viability(params)? == Viability::NeverEnter {
        return Err(domain("entry is never optimal; there is no threshold"));
    }
    let active = Resolvent::new(spec.excessive_basis(params.rho_active())?);
    Ok(find_threshold(&active, params)?.x_star)
}

/// Maximum spread of `x*` across success probabilities.
pub fn p_independence_audit(spec: &DiffusionSpec, params: &ProblemParams, p_grid: &[f64]) -> Result<f64> {
    if p_grid.is_empty() {
        return Err(domain("p grid is empty"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &p in p_grid {
        let x = solve_threshold(spec, &params.with_p(p)?)?;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok(hi - lo)
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Solves the entry problem: viability, threshold, coefficients and diagnostics.
pub fn solve(spec: &DiffusionSpec, params: &ProblemParams) -> Result<Solution> {
    params.validate()?;
    let idle = Resolvent::new(spec.excessive_basis(params.rho_idle())?);
    let active = Resolvent::new(spec.excessive_basis(params.rho_active())?);
    // integrability of h at both rates
    let h = |z: f64| params.payoff.eval(z);
    idle.apply(&h, 1.0)?;
    active.apply(&h, 1.0)?;

    let mut solution = Solution {
        params: params.clone(),
        mode: Mode::NeverEnter,
        x_star: None,
        coefficients: None,
        diagnostics: None,
        idle,
        active,
    };
    if check_entry_viability(params)? == Viability::NeverEnter {
        log::info!("lim h <= C + (r+λ)K: entry is never optimal");
        return Ok(solution);
    }

    let root = find_threshold(&solution.active, params)?;
    let x = root.x_star;
    log::debug!("threshold x* = {x} after {} iterations", root.iterations);
    let h_c = |z: f64| params.net_payoff(z);

    let pi = solution.idle.point(&h_c, x)?;
    let b_i = solution.idle.basis().wronskian();
    let c_i1 = pi.upper / b_i;
    let d_i2 = -pi.lower / b_i;
    if !(c_i1 > 0.0) {
        return Err(Error::Numeric(format!("c_i1 = {c_i1} is not positive")));
    }
    // λp R_a R_i h_C = R_i h_C - R_a h_C by the resolvent equation
    let pa = solution.active.point(&h_c, x)?;
    let (psi_i, dpsi_i) = solution.idle.basis().psi_with_prime(x)?;
    let (phi_i, dphi_i) = solution.idle.basis().phi_with_prime(x)?;
    let (psi_a, dpsi_a) = solution.active.basis().psi_with_prime(x)?;
    let c_a1 = (pi.value - pa.value - c_i1 * psi_i + d_i2 * phi_i) / psi_a;
    solution.coefficients = Some(Coefficients { c_i1, d_i2, c_a1 });
    solution.mode = Mode::Threshold;
    solution.x_star = Some(x);

    // active lower branch slope: (R_a h_C)' + c_i1 ψ_i' + c_a1 ψ_a'; upper: G_i' at x*
    let upper_slope = pi.derivative + d_i2 * dphi_i;
    let active_lower_slope = pa.derivative + c_i1 * dpsi_i + c_a1 * dpsi_a;

    let h_mass = solution.active.lower_integral(&h, x)?;
    let s = spec.scale_density(x)?;
    let rhs = (params.k + params.c / params.rho_active()) * dpsi_a / s;

    let grid = log_grid(x / 20.0, 20.0 * x, 25);
    let r_h = solution.idle.sweep(&h, &grid)?;
    let mut growth_margin = f64::INFINITY;
    for p in &r_h {
        let g = solution.value_idle(p.x)?;
        growth_margin = growth_margin.min((p.value - g) / p.value);
    }

    solution.diagnostics = Some(Diagnostics {
        break_even: root.break_even,
        pasting_gap_value: rel_gap(c_i1 * psi_i, pi.value + d_i2 * phi_i),
        pasting_gap_slope: rel_gap(c_i1 * dpsi_i, upper_slope),
        active_pasting_gap_slope: rel_gap(active_lower_slope, upper_slope),
        growth_margin,
        root_residual: root.residual,
        threshold_identity_gap: rel_gap(h_mass, rhs),
        root_iterations: root.iterations,
    });
    Ok(solution)
}

/// Half-width in `ln x` of the idle-value table used by [`Solution::bellman_residual`].
const BELLMAN_TABLE_SPAN: f64 = 10.0;
const BELLMAN_TABLE_NODES: usize = 801;

impl Solution {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn x_star(&self) -> Option<f64> {
        self.x_star
    }

    pub fn coefficients(&self) -> Option<Coefficients> {
        self.coefficients
    }

    pub fn diagnostics(&self) -> Option<Diagnostics> {
        self.diagnostics
    }

    pub fn idle_basis(&self) -> &ExcessiveBasis {
        self.idle.basis()
    }

    pub fn active_basis(&self) -> &ExcessiveBasis {
        self.active.basis()
    }

    pub fn idle_resolvent(&self) -> &Resolvent {
        &self.idle
    }

    pub fn active_resolvent(&self) -> &Resolvent {
        &self.active
    }

    /// `c_i1 ψ_i(x)`, defined on all of `(0, ∞)`.
    pub fn branch_lower(&self, x: f64) -> Result<Option<f64>> {
        match self.coefficients {
            Some(c) => Ok(Some(self.idle.basis().scaled_psi(c.c_i1, x)?)),
            None => Ok(None),
        }
    }

    /// `R_i h_C(x) + d_i2 φ_i(x)`, defined on all of `(0, ∞)`.
    pub fn branch_upper(&self, x: f64) -> Result<Option<f64>> {
        match self.coefficients {
            Some(c) => {
                let h_c = |z: f64| self.params.net_payoff(z);
                Ok(Some(self.idle.apply(&h_c, x)? + c.d_i2 * self.idle.basis().phi(x)?))
            }
            None => Ok(None),
        }
    }

    /// `G_i(x)`; identically zero when entry is never optimal.
    pub fn value_idle(&self, x: f64) -> Result<f64> {
        match self.x_star {
            None => {
                if x > 0.0 && x.is_finite() {
                    Ok(0.0)
                } else {
                    Err(domain(format!("state must be positive and finite, got {x}")))
                }
            }
            Some(xs) if x < xs => Ok(self.branch_lower(x)?.unwrap_or(0.0)),
            Some(_) => Ok(self.branch_upper(x)?.unwrap_or(0.0)),
        }
    }

    /// `G_a(x)`.
    pub fn value_active(&self, x: f64) -> Result<f64> {
        let h = |z: f64| self.params.payoff.eval(z);
        let rho_a = self.params.rho_active();
        match (self.x_star, self.coefficients) {
            (Some(xs), Some(c)) if x < xs => Ok(self.active.apply(&h, x)? - self.params.c / rho_a
                + self.idle.basis().scaled_psi(c.c_i1, x)?
                + self.active.basis().scaled_psi(c.c_a1, x)?),
            (Some(_), Some(_)) => Ok(self.value_idle(x)? + self.params.k),
            _ => Ok(self.active.apply(&h, x)? - self.params.c / rho_a),
        }
    }

    /// `G_i`, `G_a` and both idle branches on an increasing grid, sharing quadrature
    /// across points.
    pub fn curve(&self, xs: &[f64]) -> Result<Vec<CurvePoint>> {
        let h = |z: f64| self.params.payoff.eval(z);
        let rho_a = self.params.rho_active();
        let r_a = self.active.sweep(&h, xs)?;
        let (Some(x_star), Some(c)) = (self.x_star, self.coefficients) else {
            return Ok(r_a
                .iter()
                .map(|p| CurvePoint {
                    x: p.x,
                    idle: 0.0,
                    active: p.value - self.params.c / rho_a,
                    branch_lower: None,
                    branch_upper: None,
                })
                .collect());
        };
        let h_c = |z: f64| self.params.net_payoff(z);
        let r_i = self.idle.sweep(&h_c, xs)?;
        r_i.iter()
            .zip(&r_a)
            .map(|(pi, pa)| {
                let x = pi.x;
                let lower = self.idle.basis().scaled_psi(c.c_i1, x)?;
                let upper = pi.value + c.d_i2 * self.idle.basis().phi(x)?;
                let (idle, active) = if x < x_star {
                    let active = self.active.basis().scaled_psi(c.c_a1, x)?;
                    (lower, pa.value - self.params.c / rho_a + lower + active)
                } else {
                    (upper, upper + self.params.k)
                };
                Ok(CurvePoint { x, idle, active, branch_lower: Some(lower), branch_upper: Some(upper) })
            })
            .collect()
    }

    /// One-sided slopes of `G_i` at `x*` by second-order finite differences
    /// with step `rel_step · x*`, as `(left, right)`.
    pub fn idle_one_sided_slopes(&self, rel_step: f64) -> Result<Option<(f64, f64)>> {
        let Some(x) = self.x_star else { return Ok(None) };
        let e = rel_step * x;
        let g0 = self.value_idle(x)?;
        let left = (3.0 * g0 - 4.0 * self.value_idle(x - e)? + self.value_idle(x - 2.0 * e)?) / (2.0 * e);
        let right = (-3.0 * g0 + 4.0 * self.value_idle(x + e)? - self.value_idle(x + 2.0 * e)?) / (2.0 * e);
        Ok(Some((left, right)))
    }

    /// Relative residual of `G_a = R_a(h - C) + λp R_a G_i` at `x`.
    pub fn bellman_residual(&self, x: f64) -> Result<f64> {
        let h_bar = |z: f64| self.params.payoff.eval(z) - self.params.c;
        let lhs = self.value_active(x)?;
        let mut rhs = self.active.apply(&h_bar, x)?;
        let lp = self.params.lambda * self.params.p;
        if let (Some(x_star), Some(c)) = (self.x_star, self.coefficients) {
            if lp > 0.0 {
                let table = self.upper_idle_table(x_star)?;
                let phi_i = |z: f64| self.idle.basis().phi(z).unwrap_or(f64::NAN);
                let g_i = |z: f64| {
                    if z < x_star {
                        self.idle.basis().scaled_psi(c.c_i1, z).unwrap_or(f64::NAN)
                    } else if table.covers(z) {
                        table.eval(z) + c.d_i2 * phi_i(z)
                    } else {
                        self.value_idle(z).unwrap_or(f64::NAN)
                    }
                };
                rhs += lp * self.active.apply(&g_i, x)?;
            }
        }
        Ok(rel_gap(lhs, rhs))
    }

    fn upper_idle_table(&self, x_star: f64) -> Result<ResolventTable> {
        let h_c = |z: f64| self.params.net_payoff(z);
        self.idle.tabulate(&h_c, x_star, x_star * BELLMAN_TABLE_SPAN.exp(), BELLMAN_TABLE_NODES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params(p: f64) -> ProblemParams {
        ProblemParams::new(0.1, 1.0, p, 1.0, 1.0, Payoff::power(0.5).unwrap()).unwrap()
    }

    #[test]
    fn params_validation() {
        let h = Payoff::power(0.5).unwrap();
        assert!(ProblemParams::new(0.0, 1.0, 0.5, 1.0, 1.0, h.clone()).is_err());
        assert!(ProblemParams::new(0.1, 1.0, 1.5, 1.0, 1.0, h.clone()).is_err());
        assert!(ProblemParams::new(0.1, 1.0, 0.5, 0.0, 0.0, h).is_err());
        assert!(ProblemParams::new(0.1, 1.0, 0.5, 1.0, 1.0, Payoff::constant(1.0)).is_err());
        let p = base_params(0.5);
        assert!((p.rho_idle() - 0.6).abs() < 1e-15);
        assert!((p.cost_level() - 2.1).abs() < 1e-15);
    }

    #[test]
    fn viability_cases() {
        let sat = |cap| ProblemParams::new(0.1, 1.0, 0.5, 1.0, 1.0, Payoff::saturating(cap, 1.0).unwrap()).unwrap();
        assert_eq!(check_entry_viability(&sat(1.0)).unwrap(), Viability::NeverEnter);
        assert_eq!(check_entry_viability(&sat(2.1)).unwrap(), Viability::NeverEnter);
        assert_eq!(check_entry_viability(&sat(2.2)).unwrap(), Viability::Viable);
        assert_eq!(check_entry_viability(&base_params(0.5)).unwrap(), Viability::Viable);
    }

    #[test]
    fn gbm_threshold_matches_closed_form() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let params = base_params(0.5);
        let x = solve_threshold(&spec, &params).unwrap();
        let (b, a) = crate::diffusion::power_exponents(0.05, 0.25, 1.1);
        let closed = ((0.5 - a) * (0.5 * 0.0625 * b * (1.0 + 1.0 / 1.1))).powi(2);
        assert!(((x - closed) / closed).abs() < 1e-10, "{x} vs {closed}");
    }

    #[test]
    fn solution_is_consistent() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let sol = solve(&spec, &base_params(0.5)).unwrap();
        let d = sol.diagnostics().unwrap();
        assert!(d.pasting_gap_value < 1e-10 && d.pasting_gap_slope < 1e-10, "{d:?}");
        assert!(d.active_pasting_gap_slope < 1e-7, "{d:?}");
        assert!(d.threshold_identity_gap < 1e-8, "{d:?}");
        assert!(d.growth_margin > 0.0);
        let x = sol.x_star().unwrap();
        assert!(d.break_even < x);
        assert!((sol.value_active(2.0 * x).unwrap() - sol.value_idle(2.0 * x).unwrap() - 1.0).abs() < 1e-9);
        assert!(sol.value_idle(1e-3).unwrap() < 1e-12);
        let (l, r) = sol.idle_one_sided_slopes(1e-4).unwrap().unwrap();
        assert!(((l - r) / r).abs() < 1e-6, "{l} {r}");
    }

    #[test]
    fn bellman_identity() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let sol = solve(&spec, &base_params(0.5)).unwrap();
        let x = sol.x_star().unwrap();
        for z in [0.5 * x, 1.5 * x] {
            let res = sol.bellman_residual(z).unwrap();
            assert!(res < 1e-6, "at {z}: {res}");
        }
    }

    #[test]
    fn p_zero_and_one() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let zero = solve(&spec, &base_params(0.0)).unwrap();
        let c = zero.coefficients().unwrap();
        // the d_i2 term vanishes when both rates coincide
        let xs = zero.x_star().unwrap();
        let basis = zero.idle_basis();
        let lower_term = c.c_i1 * basis.psi(xs).unwrap();
        assert!((c.d_i2 * basis.phi(xs).unwrap()).abs() < 1e-10 * lower_term);
        assert!(((c.c_a1 + c.c_i1) / c.c_i1).abs() < 1e-8);
        // single entry: the active value is a one-shot stint
        let x = 0.5 * zero.x_star().unwrap();
        let h_bar = |z: f64| z.sqrt() - 1.0;
        let one_shot = zero.active_resolvent().apply(&h_bar, x).unwrap();
        assert!(((zero.value_active(x).unwrap() - one_shot) / one_shot).abs() < 1e-8);
        let one = solve(&spec, &base_params(1.0)).unwrap();
        assert!(one.coefficients().unwrap().c_a1.is_finite());
    }

    #[test]
    fn normalisation_invariance() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let sol = solve(&spec, &base_params(0.5)).unwrap();
        let x = sol.x_star().unwrap();
        let scaled = Resolvent::new(sol.idle_basis().rescaled(3.0, 0.25));
        let h_c = |z: f64| sol.params().net_payoff(z);
        let pt = scaled.point(&h_c, x).unwrap();
        let c_i1 = pt.upper / scaled.basis().wronskian();
        for z in [0.3 * x, 0.9 * x] {
            let v = c_i1 * scaled.basis().psi(z).unwrap();
            assert!(((v - sol.value_idle(z).unwrap()) / v).abs() < 1e-10);
        }
    }

    #[test]
    fn curve_matches_pointwise() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let sol = solve(&spec, &base_params(0.6)).unwrap();
        let xs: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
        for pt in sol.curve(&xs).unwrap() {
            let gi = sol.value_idle(pt.x).unwrap();
            let ga = sol.value_active(pt.x).unwrap();
            assert!((pt.idle - gi).abs() < 1e-9 * (1.0 + gi.abs()), "{pt:?}");
            assert!((pt.active - ga).abs() < 1e-9 * (1.0 + ga.abs()), "{pt:?}");
        }
    }

    #[test]
    fn never_enter_solution() {
        let spec = DiffusionSpec::gbm(0.05, 0.25).unwrap();
        let params = ProblemParams::new(0.1, 1.0, 0.5, 1.0, 1.0, Payoff::saturating(1.0, 1.0).unwrap()).unwrap();
        let sol = solve(&spec, &params).unwrap();
        assert_eq!(sol.mode(), Mode::NeverEnter);
        assert_eq!(sol.x_star(), None);
        assert_eq!(sol.value_idle(3.0).unwrap(), 0.0);
        assert!(solve_threshold(&spec, &params).is_err());
    }
}

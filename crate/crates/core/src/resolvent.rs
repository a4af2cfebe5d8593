//! The resolvent `(R_ρ h)(x) = E_x ∫ e^{-ρt} h(X_t) dt` through its
//! Green-function representation
//!
//! ```text
//! (R_ρ h)(x) = B_ρ⁻¹ [ φ_ρ(x) ∫_0^x ψ_ρ h m' + ψ_ρ(x) ∫_x^∞ φ_ρ h m' ].
//! ```
//!
//! All integrals run on the log-state axis `y = ln z`.

use crate::diffusion::ExcessiveBasis;
use crate::error::{domain, Result};
use crate::numeric::{adaptive, integrate_tail, HermiteTable, QuadTol};

/// Which half of a payoff split at `y` is fed to the resolvent:
/// `Below` keeps `h·1{z < y}`, `Above` keeps `h·1{z ≥ y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

pub const DEFAULT_TOLERANCE: QuadTol = QuadTol::new(1e-15, 1e-10);

/// Largest half-width (in `ln x`) of the table used for the inner resolvent in
/// [`resolvent_equation_check`].
const INNER_TABLE_HALF_WIDTH: f64 = 8.0;
const INNER_TABLE_NODES: usize = 801;
/// Outer weights below `e^{-60}` of their peak are treated as zero.
const NEGLIGIBLE_LOG_WEIGHT: f64 = 60.0;
const SUPPORT_SCAN_FACTOR: f64 = 1.1;

#[derive(Debug, Clone)]
pub struct Resolvent {
    basis: ExcessiveBasis,
    tol: QuadTol,
}

/// `R_ρ h` and `(R_ρ h)'` together with the two integrals they are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventPoint {
    pub x: f64,
    pub value: f64,
    pub derivative: f64,
    /// `∫_0^x ψ h m'`.
    pub lower: f64,
    /// `∫_x^∞ φ h m'`.
    pub upper: f64,
}

/// An integral held as `value · e^{shift}`.
#[derive(Debug, Clone, Copy)]
struct Shifted {
    value: f64,
    shift: f64,
}

impl Shifted {
    fn times_exp(self, ln_factor: f64) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value * (self.shift + ln_factor).exp()
        }
    }

    fn total(self) -> f64 {
        self.times_exp(0.0)
    }

    /// The value expressed against `shift` instead.
    fn rebased(self, shift: f64) -> f64 {
        self.times_exp(-shift)
    }
}

fn weighted(h: &dyn Fn(f64) -> f64, z: f64, w: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    let hz = h(z);
    if hz == 0.0 {
        return Ok(0.0);
    }
    Ok(hz * w)
}

fn check_state(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("state must be positive and finite, got {x}")))
    }
}

impl Resolvent {
    pub fn new(basis: ExcessiveBasis) -> Self {
        Self { basis, tol: DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(mut self, tol: QuadTol) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> QuadTol {
        self.tol
    }

    pub fn basis(&self) -> &ExcessiveBasis {
        &self.basis
    }

    pub fn rho(&self) -> f64 {
        self.basis.rho()
    }

    /// `ψ(z) h(z) m'(z) z e^{-shift}` at `z = e^y`.
    fn psi_integrand<'a>(&'a self, h: &'a dyn Fn(f64) -> f64, shift: f64) -> impl FnMut(f64) -> Result<f64> + 'a {
        move |y: f64| {
            let z = y.exp();
            let w = (self.basis.ln_psi(z)? + self.basis.spec().ln_speed_density(z)? + y - shift).exp();
            weighted(h, z, w)
        }
    }

    /// `φ(z) h(z) m'(z) z e^{-shift}` at `z = e^y`.
    fn phi_integrand<'a>(&'a self, h: &'a dyn Fn(f64) -> f64, shift: f64) -> impl FnMut(f64) -> Result<f64> + 'a {
        move |y: f64| {
            let z = y.exp();
            let w = (self.basis.ln_phi(z)? + self.basis.spec().ln_speed_density(z)? + y - shift).exp();
            weighted(h, z, w)
        }
    }

    /// Log of the `ψ` and `φ` integrand weights at `x`, used as shifts so that
    /// integrals next to `x` stay representable.
    fn shifts(&self, x: f64) -> Result<(f64, f64)> {
        let common = self.basis.spec().ln_speed_density(x)? + x.ln();
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        Ok((finite(self.basis.ln_psi(x)? + common), finite(self.basis.ln_phi(x)? + common)))
    }

    fn lower_tail(&self, h: &dyn Fn(f64) -> f64, x: f64, shift: f64) -> Result<Shifted> {
        let value = integrate_tail(self.psi_integrand(h, shift), x.ln(), -1.0, self.tol)?.0;
        Ok(Shifted { value, shift })
    }

    fn upper_tail(&self, h: &dyn Fn(f64) -> f64, x: f64, shift: f64) -> Result<Shifted> {
        let value = integrate_tail(self.phi_integrand(h, shift), x.ln(), 1.0, self.tol)?.0;
        Ok(Shifted { value, shift })
    }

    fn lower_panel(&self, h: &dyn Fn(f64) -> f64, a: f64, b: f64, shift: f64) -> Result<Shifted> {
        let value = adaptive(self.psi_integrand(h, shift), a.ln(), b.ln(), self.tol)?.0;
        Ok(Shifted { value, shift })
    }

    fn upper_panel(&self, h: &dyn Fn(f64) -> f64, a: f64, b: f64, shift: f64) -> Result<Shifted> {
        let value = adaptive(self.phi_integrand(h, shift), a.ln(), b.ln(), self.tol)?.0;
        Ok(Shifted { value, shift })
    }

    /// `∫_0^x ψ h m'`.
    pub fn lower_integral(&self, h: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
        check_state(x)?;
        Ok(self.lower_tail(h, x, self.shifts(x)?.0)?.total())
    }

    /// `∫_x^∞ φ h m'`.
    pub fn upper_integral(&self, h: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
        check_state(x)?;
        Ok(self.upper_tail(h, x, self.shifts(x)?.1)?.total())
    }

    /// `∫_a^b ψ h m'` for `0 < a ≤ b`.
    pub fn lower_integral_between(&self, h: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        check_state(a)?;
        check_state(b)?;
        Ok(self.lower_panel(h, a, b, 0.0)?.value)
    }

    /// `∫_a^b φ h m'` for `0 < a ≤ b`.
    pub fn upper_integral_between(&self, h: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        check_state(a)?;
        check_state(b)?;
        Ok(self.upper_panel(h, a, b, 0.0)?.value)
    }

    /// `(φ·lower + ψ·upper)/B` and its derivative, formed in log space since
    /// `ψ` may overflow where `upper` underflows.
    fn assemble(&self, x: f64, lower: Shifted, upper: Shifted) -> Result<ResolventPoint> {
        let (ln_psi, psi_slope) = self.basis.ln_psi_with_slope(x)?;
        let (ln_phi, phi_slope) = self.basis.ln_phi_with_slope(x)?;
        let b = self.basis.wronskian();
        let below = lower.times_exp(ln_phi);
        let above = upper.times_exp(ln_psi);
        Ok(ResolventPoint {
            x,
            value: (below + above) / b,
            derivative: (phi_slope * below + psi_slope * above) / b,
            lower: lower.total(),
            upper: upper.total(),
        })
    }

    /// `R_ρ h`, `(R_ρ h)'` and the two integrals at `x`.
    pub fn point(&self, h: &dyn Fn(f64) -> f64, x: f64) -> Result<ResolventPoint> {
        check_state(x)?;
        let (s_psi, s_phi) = self.shifts(x)?;
        let lower = self.lower_tail(h, x, s_psi)?;
        let upper = self.upper_tail(h, x, s_phi)?;
        self.assemble(x, lower, upper)
    }

    pub fn apply(&self, h: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
        Ok(self.point(h, x)?.value)
    }

    /// `(R_ρ h)'(x)` from differentiating the representation; the boundary terms cancel.
    pub fn derivative(&self, h: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
        Ok(self.point(h, x)?.derivative)
    }

    /// `R_ρ ȟ_y` or `R_ρ ĥ_y` at `x`.
    pub fn apply_split(&self, h: &dyn Fn(f64) -> f64, y: f64, side: Side, x: f64) -> Result<f64> {
        check_state(y)?;
        check_state(x)?;
        let (s_psi, s_phi) = self.shifts(x)?;
        let none = |shift| Shifted { value: 0.0, shift };
        let (lower, upper) = match side {
            Side::Below if x < y => (self.lower_tail(h, x, s_psi)?, self.upper_panel(h, x, y, s_phi)?),
            Side::Below => (self.lower_tail(h, y, self.shifts(y)?.0)?, none(s_phi)),
            Side::Above if x < y => (none(s_psi), self.upper_tail(h, y, self.shifts(y)?.1)?),
            Side::Above => (self.lower_panel(h, y, x, s_psi)?, self.upper_tail(h, x, s_phi)?),
        };
        Ok(self.assemble(x, lower, upper)?.value)
    }

    /// Resolvent points at every state of the increasing sequence `xs`, sharing
    /// the integrals: two tails plus one panel integral per gap.
    pub fn sweep(&self, h: &dyn Fn(f64) -> f64, xs: &[f64]) -> Result<Vec<ResolventPoint>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(domain("resolvent sweep needs strictly increasing states"));
            }
        }
        check_state(xs[0])?;
        check_state(xs[xs.len() - 1])?;
        let n = xs.len();
        let shifts = xs.iter().map(|&x| self.shifts(x)).collect::<Result<Vec<_>>>()?;
        let mut lower = Vec::with_capacity(n);
        lower.push(self.lower_tail(h, xs[0], shifts[0].0)?);
        for k in 1..n {
            let s = shifts[k].0;
            let panel = self.lower_panel(h, xs[k - 1], xs[k], s)?;
            lower.push(Shifted { value: lower[k - 1].rebased(s) + panel.value, shift: s });
        }
        let mut upper = vec![self.upper_tail(h, xs[n - 1], shifts[n - 1].1)?; n];
        for k in (0..n - 1).rev() {
            let s = shifts[k].1;
            let panel = self.upper_panel(h, xs[k], xs[k + 1], s)?;
            upper[k] = Shifted { value: upper[k + 1].rebased(s) + panel.value, shift: s };
        }
        xs.iter()
            .zip(lower.into_iter().zip(upper))
            .map(|(&x, (lo, up))| self.assemble(x, lo, up))
            .collect()
    }

    /// Cubic Hermite table of `R_ρ h` on `n` log-spaced nodes over `[lo, hi]`,
    /// using the exact derivative at each node.
    pub fn tabulate(&self, h: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<ResolventTable> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(domain(format!("invalid table range [{lo}, {hi}] with {n} nodes")));
        }
        let xs = crate::diffusion::log_grid(lo, hi, n);
        let pts = self.sweep(h, &xs)?;
        let t: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let f: Vec<f64> = pts.iter().map(|p| p.value).collect();
        let df: Vec<f64> = pts.iter().map(|p| p.derivative * p.x).collect();
        Ok(ResolventTable { lo, hi, table: HermiteTable::new(t, f, df) })
    }

    /// Relative residuals of the three identities linking `R_ρ h`, `(R_ρ h)'`
    /// and the two integrals at `x`:
    ///
    /// ```text
    /// (Rh)' - Rh ψ'/ψ          = -S'/ψ ∫_0^x ψ h m'
    /// φ'/S' Rh - (Rh)' φ/S'    = -∫_x^∞ φ h m'
    /// ψ'/S' Rh - (Rh)' ψ/S'    =  ∫_0^x ψ h m'
    /// ```
    ///
    /// `derivative` is supplied by the caller so that an independent estimate
    /// (e.g. a finite difference) can be tested.
    pub fn identity_residuals(&self, h: &dyn Fn(f64) -> f64, x: f64, derivative: Option<f64>) -> Result<[f64; 3]> {
        let pt = self.point(h, x)?;
        let d = derivative.unwrap_or(pt.derivative);
        let (psi, dpsi) = self.basis.psi_with_prime(x)?;
        let (phi, dphi) = self.basis.phi_with_prime(x)?;
        let s = self.basis.spec().scale_density(x)?;
        let rel = |lhs: f64, rhs: f64| {
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            (lhs - rhs).abs() / scale
        };
        Ok([
            rel(d - pt.value * dpsi / psi, -s / psi * pt.lower),
            rel(dphi / s * pt.value - d * phi / s, -pt.upper),
            rel(dpsi / s * pt.value - d * psi / s, pt.lower),
        ])
    }
}

/// Tabulated `R_ρ h` on a log-spaced range; linear extrapolation in `ln x` outside.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    lo: f64,
    hi: f64,
    table: HermiteTable,
}

impl ResolventTable {
    pub fn covers(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.table.eval(x.ln())
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let (v, dt) = self.table.eval_with_derivative(x.ln());
        (v, dt / x)
    }
}

/// Range around `x` outside which the weights `ψ_q m'` (below `x`) and
/// `φ_q m'` (above `x`) of the outer resolvent have fallen by
/// `NEGLIGIBLE_LOG_WEIGHT` from their peak, capped at `x·e^{±8}`.
fn outer_weight_support(res_q: &Resolvent, x: f64) -> Result<(f64, f64)> {
    let basis = res_q.basis();
    let spec = basis.spec();
    let w = INNER_TABLE_HALF_WIDTH.exp();
    let scan = |ln_u: &dyn Fn(f64) -> Result<f64>, factor: f64, limit: f64| -> Result<f64> {
        let weight = |z: f64| -> Result<f64> { Ok(ln_u(z)? + spec.ln_speed_density(z)? + z.ln()) };
        let mut z = x;
        let mut peak = weight(z)?;
        loop {
            let next = z * factor;
            if (factor > 1.0 && next >= limit) || (factor < 1.0 && next <= limit) {
                return Ok(limit);
            }
            z = next;
            let v = weight(z)?;
            peak = peak.max(v);
            if v < peak - NEGLIGIBLE_LOG_WEIGHT {
                return Ok(z);
            }
        }
    };
    let lo = scan(&|z| basis.ln_psi(z), 1.0 / SUPPORT_SCAN_FACTOR, x / w)?;
    let hi = scan(&|z| basis.ln_phi(z), SUPPORT_SCAN_FACTOR, x * w)?;
    Ok((lo, hi))
}

/// `|R_q h - R_p h + (q - p) R_q R_p h|(x)`. The inner `R_p h` is tabulated
/// where the outer weights matter and evaluated directly outside the table.
pub fn resolvent_equation_check(
    res_q: &Resolvent,
    res_p: &Resolvent,
    h: &dyn Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    let (q, p) = (res_q.rho(), res_p.rho());
    if q == p {
        return Err(domain(format!("resolvent equation needs distinct rates, got q = p = {q}")));
    }
    check_state(x)?;
    let (lo, hi) = outer_weight_support(res_q, x)?;
    let table = res_p.tabulate(h, lo, hi, INNER_TABLE_NODES)?;
    let inner = |z: f64| {
        if table.covers(z) {
            table.eval(z)
        } else {
            res_p.apply(h, z).unwrap_or(f64::NAN)
        }
    };
    let rq = res_q.apply(h, x)?;
    let rp = res_p.apply(h, x)?;
    let rqrp = res_q.apply(&inner, x)?;
    Ok((rq - rp + (q - p) * rqrp).abs())
}

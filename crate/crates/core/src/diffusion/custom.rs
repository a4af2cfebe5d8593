//! Numerical fundamental solutions for user-supplied coefficients.
//!
//! On `t = ln x` write `u = exp(w)` and `v = w_t`. Then `𝒜u = ρu` becomes the
//! Riccati equation
//!
//! ```text
//! v_t = 2ρ/s² - v² - (2m/s² - 1) v,    s = β(x)/x,  m = α(x)/x.
//! ```
//!
//! With frozen coefficients its fixed points are `b > 0 > a`; `b` attracts
//! when integrating toward `+∞` and `a` attracts toward `-∞`. So `ψ` is built
//! forward from far below the working interval, `φ` backward from far above,
//! each started at the local fixed point. Both are normalised to 1 at `x = 1`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::HermiteTable;

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Grid step on the log-state axis.
const STEP: f64 = 0.01;
/// `B(x) = ∫_1^x 2α/β²` is tabulated on `[e^-SCALE_SPAN, e^SCALE_SPAN]`.
const SCALE_SPAN: f64 = 18.420_680_743_952_367; // ln 1e8
/// Working interval: expand until `ψ(x_lo)` and `φ(x_hi)` fall below this
/// fraction of their value at `x = 1`.
const TAIL_RATIO_LN: f64 = -23.025_850_929_940_457; // ln 1e-10
const INITIAL_SPAN: f64 = 4.605_170_185_988_091; // ln 100
const MAX_SPAN: f64 = 27.631_021_115_928_547; // ln 1e12
/// Target decay `∫ (b - a) dt` of the start-up transient.
const BURN_IN_DECAY: f64 = 40.0;
/// Stop widening the upper end once `ln ψ` passes this; beyond it ψ overflows
/// long before any integrand there matters.
const LN_PSI_CEILING: f64 = 600.0;
/// RK4 sub-steps keep `|h ∂f/∂v|` below this.
const MAX_STIFF_STEP: f64 = 0.5;

#[derive(Clone)]
pub struct CustomDiffusion {
    drift: Coefficient,
    vol: Coefficient,
    scale: Arc<HermiteTable>,
}

impl fmt::Debug for CustomDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDiffusion")
            .field("scale_nodes", &self.scale.nodes().len())
            .finish_non_exhaustive()
    }
}

fn rk4<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// RK4 over `h`, split into enough sub-steps that `|h_sub · ∂f/∂v|` stays small.
/// The Riccati right-hand side is quadratic in `v`, so the central difference
/// below is its exact Jacobian.
fn advance<F: Fn(f64, f64) -> f64>(f: &F, t: f64, v: f64, h: f64) -> f64 {
    let d = 1e-3 * (1.0 + v.abs());
    let jac = (f(t, v + d) - f(t, v - d)) / (2.0 * d);
    let n = ((h * jac).abs() / MAX_STIFF_STEP).ceil().max(1.0);
    if !n.is_finite() || n > 1e6 {
        return f64::NAN;
    }
    let n = n as usize;
    let hs = h / n as f64;
    let mut v = v;
    for i in 0..n {
        v = rk4(f, t + i as f64 * hs, v, hs);
    }
    v
}

impl CustomDiffusion {
    pub(crate) fn new(drift: Coefficient, vol: Coefficient) -> Result<Self> {
        let n = (SCALE_SPAN / STEP).round() as i64;
        let slope = |t: f64| {
            let x = t.exp();
            let s = vol(x);
            2.0 * drift(x) * x / (s * s)
        };
        // probe the coefficients before integrating
        for k in (-n..=n).step_by(50) {
            let x = (k as f64 * STEP).exp();
            let (m, s) = (drift(x), vol(x));
            if !(s > 0.0) || !s.is_finite() || !m.is_finite() {
                return Err(Error::Construction(format!(
                    "custom coefficients invalid at x = {x}: drift {m}, vol {s}"
                )));
            }
        }
        let rhs = |t: f64, _: f64| slope(t);
        let mut t_nodes = Vec::with_capacity(2 * n as usize + 1);
        let mut b_nodes = Vec::with_capacity(2 * n as usize + 1);
        // integrate outward from t = 0 in both directions
        let mut down = vec![0.0];
        let mut b = 0.0;
        for k in 0..n {
            b = rk4(&rhs, -(k as f64) * STEP, b, -STEP);
            down.push(b);
        }
        let mut up = vec![0.0];
        b = 0.0;
        for k in 0..n {
            b = rk4(&rhs, k as f64 * STEP, b, STEP);
            up.push(b);
        }
        for k in (1..=n as usize).rev() {
            t_nodes.push(-(k as f64) * STEP);
            b_nodes.push(down[k]);
        }
        for (k, v) in up.iter().enumerate() {
            t_nodes.push(k as f64 * STEP);
            b_nodes.push(*v);
        }
        let d_nodes: Vec<f64> = t_nodes.iter().map(|&t| slope(t)).collect();
        if b_nodes.iter().chain(&d_nodes).any(|v| !v.is_finite()) {
            return Err(Error::Construction("scale integral is not finite".into()));
        }
        Ok(Self { drift, vol, scale: Arc::new(HermiteTable::new(t_nodes, b_nodes, d_nodes)) })
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn vol(&self, x: f64) -> f64 {
        (self.vol)(x)
    }

    /// `∫_1^x 2α(y)/β²(y) dy`.
    pub(crate) fn log_scale_integral(&self, x: f64) -> f64 {
        self.scale.eval(x.ln())
    }

    /// Riccati right-hand side and the frozen-coefficient roots `(b, a)` at `t`.
    fn riccati(&self, rho: f64) -> impl Fn(f64, f64) -> f64 + '_ {
        move |t: f64, v: f64| {
            let x = t.exp();
            let s = self.vol(x) / x;
            let s2 = s * s;
            let m = self.drift(x) / x;
            2.0 * rho / s2 - v * v - (2.0 * m / s2 - 1.0) * v
        }
    }

    fn frozen_roots(&self, rho: f64, t: f64) -> (f64, f64) {
        let x = t.exp();
        let s = self.vol(x) / x;
        let s2 = s * s;
        let p = 2.0 * self.drift(x) / x / s2 - 1.0;
        let q = 2.0 * rho / s2;
        let disc = (p * p + 4.0 * q).sqrt();
        (0.5 * (-p + disc), 0.5 * (-p - disc))
    }
}

/// Tabulated `ln ψ`, `ln φ` and their log-derivatives on a common grid.
#[derive(Debug)]
pub(crate) struct RiccatiTables {
    ln_psi: HermiteTable,
    v_psi: HermiteTable,
    ln_phi: HermiteTable,
    v_phi: HermiteTable,
}

struct Branch {
    w: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
}

impl RiccatiTables {
    pub(crate) fn build(diff: &CustomDiffusion, rho: f64) -> Result<Self> {
        let mut lo_steps = (INITIAL_SPAN / STEP).round() as usize;
        let mut hi_steps = lo_steps;
        let max_steps = (MAX_SPAN / STEP).round() as usize;
        let grow = (INITIAL_SPAN / 2.0 / STEP).round() as usize;
        loop {
            let (t, psi, phi) = Self::integrate(diff, rho, lo_steps, hi_steps)?;
            let psi_ok = psi.w[0] < TAIL_RATIO_LN;
            let phi_ok =
                *phi.w.last().unwrap() < TAIL_RATIO_LN || *psi.w.last().unwrap() > LN_PSI_CEILING;
            let mut expanded = false;
            if !psi_ok && lo_steps < max_steps {
                lo_steps = (lo_steps + grow).min(max_steps);
                expanded = true;
            }
            if !phi_ok && hi_steps < max_steps {
                hi_steps = (hi_steps + grow).min(max_steps);
                expanded = true;
            }
            if expanded {
                continue;
            }
            if !psi_ok || !phi_ok {
                // e.g. an entrance boundary where φ tends to a positive constant
                log::debug!(
                    "custom basis at rho = {rho}: working-interval criterion not met within \
                     [{:.3e}, {:.3e}]",
                    t[0].exp(),
                    t.last().unwrap().exp()
                );
            }
            return Self::finish(t, psi, phi);
        }
    }

    fn integrate(
        diff: &CustomDiffusion,
        rho: f64,
        lo_steps: usize,
        hi_steps: usize,
    ) -> Result<(Vec<f64>, Branch, Branch)> {
        let t_lo = -(lo_steps as f64) * STEP;
        let t_hi = hi_steps as f64 * STEP;
        let n = lo_steps + hi_steps + 1;
        let t: Vec<f64> = (0..n).map(|k| t_lo + k as f64 * STEP).collect();
        let rhs = diff.riccati(rho);

        let burn_in = |t0: f64| {
            let (b, a) = diff.frozen_roots(rho, t0);
            ((BURN_IN_DECAY / (b - a)) / STEP).ceil().clamp(200.0, 4000.0) as usize
        };

        // ψ: forward from below t_lo
        let pre = burn_in(t_lo);
        let mut tt = t_lo - pre as f64 * STEP;
        let mut v = diff.frozen_roots(rho, tt).0;
        for _ in 0..pre {
            v = advance(&rhs, tt, v, STEP);
            tt += STEP;
        }
        let mut psi = Branch { w: vec![0.0; n], v: vec![0.0; n], dv: vec![0.0; n] };
        psi.v[0] = v;
        for k in 1..n {
            let t0 = t[k - 1];
            let v0 = psi.v[k - 1];
            // w_t = v; Simpson's rule with the midpoint value
            let vm = advance(&rhs, t0, v0, 0.5 * STEP);
            let v1 = advance(&rhs, t0 + 0.5 * STEP, vm, 0.5 * STEP);
            psi.v[k] = v1;
            psi.w[k] = psi.w[k - 1] + STEP / 6.0 * (v0 + 4.0 * vm + v1);
        }

        // φ: backward from above t_hi
        let post = burn_in(t_hi);
        let mut tt = t_hi + post as f64 * STEP;
        let mut v = diff.frozen_roots(rho, tt).1;
        for _ in 0..post {
            v = advance(&rhs, tt, v, -STEP);
            tt -= STEP;
        }
        let mut phi = Branch { w: vec![0.0; n], v: vec![0.0; n], dv: vec![0.0; n] };
        phi.v[n - 1] = v;
        for k in (0..n - 1).rev() {
            let t1 = t[k + 1];
            let v1 = phi.v[k + 1];
            let vm = advance(&rhs, t1, v1, -0.5 * STEP);
            let v0 = advance(&rhs, t1 - 0.5 * STEP, vm, -0.5 * STEP);
            phi.v[k] = v0;
            phi.w[k] = phi.w[k + 1] - STEP / 6.0 * (v0 + 4.0 * vm + v1);
        }

        // normalise at t = 0, which is node lo_steps
        let (wp0, wf0) = (psi.w[lo_steps], phi.w[lo_steps]);
        for (k, &tk) in t.iter().enumerate() {
            psi.w[k] -= wp0;
            phi.w[k] -= wf0;
            psi.dv[k] = rhs(tk, psi.v[k]);
            phi.dv[k] = rhs(tk, phi.v[k]);
        }
        Ok((t, psi, phi))
    }

    fn finish(t: Vec<f64>, psi: Branch, phi: Branch) -> Result<Self> {
        let all_finite = psi
            .w
            .iter()
            .chain(&psi.v)
            .chain(&phi.w)
            .chain(&phi.v)
            .chain(&psi.dv)
            .chain(&phi.dv)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Construction("fundamental solutions are not finite".into()));
        }
        if psi.v.iter().any(|&v| v <= 0.0) {
            return Err(Error::Construction("increasing solution failed monotonicity".into()));
        }
        if phi.v.iter().any(|&v| v >= 0.0) {
            return Err(Error::Construction("decreasing solution failed monotonicity".into()));
        }
        Ok(Self {
            ln_psi: HermiteTable::new(t.clone(), psi.w, psi.v.clone()),
            v_psi: HermiteTable::new(t.clone(), psi.v, psi.dv),
            ln_phi: HermiteTable::new(t.clone(), phi.w, phi.v.clone()),
            v_phi: HermiteTable::new(t, phi.v, phi.dv),
        })
    }

    /// `B_ρ` at `x = 1`, where `ψ = φ = S' = 1`.
    pub(crate) fn wronskian(&self) -> f64 {
        self.v_psi.eval(0.0) - self.v_phi.eval(0.0)
    }

    fn eval(w: &HermiteTable, v: &HermiteTable, x: f64) -> (f64, f64) {
        let t = x.ln();
        let u = w.eval(t).exp();
        (u, u * v.eval(t) / x)
    }

    pub(crate) fn ln_psi(&self, x: f64) -> f64 {
        self.ln_psi.eval(x.ln())
    }

    pub(crate) fn ln_phi(&self, x: f64) -> f64 {
        self.ln_phi.eval(x.ln())
    }

    /// `(ln u(x), u'(x)/u(x))` for `u = ψ`.
    pub(crate) fn psi_log(&self, x: f64) -> (f64, f64) {
        let t = x.ln();
        (self.ln_psi.eval(t), self.v_psi.eval(t) / x)
    }

    pub(crate) fn phi_log(&self, x: f64) -> (f64, f64) {
        let t = x.ln();
        (self.ln_phi.eval(t), self.v_phi.eval(t) / x)
    }

    pub(crate) fn psi(&self, x: f64) -> (f64, f64) {
        Self::eval(&self.ln_psi, &self.v_psi, x)
    }

    pub(crate) fn phi(&self, x: f64) -> (f64, f64) {
        Self::eval(&self.ln_phi, &self.v_phi, x)
    }
}

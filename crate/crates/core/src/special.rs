//! Confluent hypergeometric functions for real, non-negative arguments.
//!
//! - `M(a, b, z)` (Kummer, first kind): Taylor series up to `z = 30`, the large-`z`
//!   asymptotic expansion beyond that when it converges, series otherwise.
//! - `U(a, b, z)` (Tricomi, second kind), `a > 0`: the Laplace integral
//!   `Γ(a)⁻¹ ∫₀^∞ e^{-zt} t^{a-1} (1+t)^{b-a-1} dt`, integrated on `u = ln t`
//!   outward from the integrand's mode.
//!
//! Iteration caps (500 series terms, 20 quadrature refinement levels) are hard
//! errors rather than silent truncations.

use crate::error::{domain, Error, Result};
use crate::numeric::{brent, integrate_tail, CompensatedSum, QuadTol};

/// Maximum number of series terms before [`Error::Accuracy`].
pub const MAX_SERIES_TERMS: usize = 500;

/// Above this argument `M` switches to the asymptotic expansion.
pub const SERIES_Z_LIMIT: f64 = 30.0;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln |Γ(x)|` by the Lanczos approximation (reflection below 1/2).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s.abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn is_non_positive_integer(v: f64) -> bool {
    v <= 0.0 && v == v.floor()
}

/// Kummer's function `M(a, b, z)` for `z ≥ 0`.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(domain(format!("kummer_m requires finite z >= 0, got {z}")));
    }
    kummer_m_signed(a, b, z)
}

/// `M(a, b, z)` for any real `z`. Negative arguments use the plain series and
/// lose accuracy to cancellation once `|z|` grows; kept for cross-checks.
pub fn kummer_m_signed(a: f64, b: f64, z: f64) -> Result<f64> {
    if is_non_positive_integer(b) {
        return Err(domain(format!("kummer_m undefined for b = {b} (non-positive integer)")));
    }
    if !a.is_finite() || !b.is_finite() || !z.is_finite() {
        return Err(domain("kummer_m requires finite arguments"));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if z > SERIES_Z_LIMIT && a > 0.0 && b > 0.0 {
        if let Some((log_prefactor, sum)) = kummer_m_asymptotic_parts(a, b, z) {
            let v = log_prefactor.exp() * sum;
            if !v.is_finite() {
                return Err(Error::Accuracy(format!("kummer_m({a}, {b}, {z}) overflows; use ln_kummer_m")));
            }
            return Ok(v);
        }
    }
    kummer_m_series(a, b, z)
}

fn kummer_m_series(a: f64, b: f64, z: f64) -> Result<f64> {
    let mut sum = CompensatedSum::new();
    let mut term = 1.0_f64;
    sum.add(term);
    let mut quiet = 0;
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        term *= (a + nf) * z / ((b + nf) * (nf + 1.0));
        if term == 0.0 {
            return Ok(sum.total());
        }
        sum.add(term);
        if !sum.total().is_finite() {
            return Err(Error::Accuracy(format!("kummer_m series overflow at z = {z}")));
        }
        // terms shrink monotonically once n exceeds |a z / b|; require a few in a row
        if term.abs() <= 1e-17 * sum.total().abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum.total());
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Accuracy(format!(
        "kummer_m series for ({a}, {b}, {z}) did not converge in {MAX_SERIES_TERMS} terms"
    )))
}

/// Leading large-`z` expansion
/// `M ~ Γ(b)/Γ(a) e^z z^{a-b} Σ_k (b-a)_k (1-a)_k / (k! z^k)`, truncated at its
/// smallest term. Returns `ln` of the prefactor and the sum, or `None` if the
/// smallest term is not negligible.
fn kummer_m_asymptotic_parts(a: f64, b: f64, z: f64) -> Option<(f64, f64)> {
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut converged = false;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let next = term * (b - a + kf) * (1.0 - a + kf) / ((kf + 1.0) * z);
        if next == 0.0 {
            converged = true;
            break;
        }
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    Some((ln_gamma(b) - ln_gamma(a) + z + (a - b) * z.ln(), sum))
}

#[cfg(test)]
fn kummer_m_asymptotic(a: f64, b: f64, z: f64) -> Option<f64> {
    let (log_prefactor, sum) = kummer_m_asymptotic_parts(a, b, z)?;
    let v = log_prefactor.exp() * sum;
    v.is_finite().then_some(v)
}

/// `ln M(a, b, z)` for `a, b > 0` and `z ≥ 0`; finite where `M` itself overflows.
pub fn ln_kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("ln_kummer_m requires a, b > 0, got a = {a}, b = {b}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(domain(format!("ln_kummer_m requires finite z >= 0, got {z}")));
    }
    if z > SERIES_Z_LIMIT {
        if let Some((log_prefactor, sum)) = kummer_m_asymptotic_parts(a, b, z) {
            if sum > 0.0 {
                return Ok(log_prefactor + sum.ln());
            }
        }
    }
    Ok(kummer_m_series(a, b, z)?.ln())
}

/// Tricomi's function `U(a, b, z)` for `a > 0`, `z ≥ 0`.
pub fn tricomi_u(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("tricomi_u requires a > 0 and finite b, got a = {a}, b = {b}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(domain(format!("tricomi_u requires finite z >= 0, got {z}")));
    }
    if z == 0.0 {
        if b >= 1.0 {
            return Err(domain(format!("tricomi_u diverges at z = 0 for b = {b} >= 1")));
        }
        // U(a, b, 0) = Γ(1-b) / Γ(a-b+1)
        return Ok((ln_gamma(1.0 - b) - ln_gamma(a - b + 1.0)).exp());
    }

    let c = b - a - 1.0;
    let log_integrand = move |u: f64| -> f64 {
        let t = u.exp();
        a * u + c * softplus(u) - z * t
    };
    let slope = move |u: f64| -> f64 { a + c * logistic(u) - z * u.exp() };

    // the log-integrand has exactly one stationary point: its slope starts at a > 0
    // and ends at -∞, and ln(a + cσ(u)) - u is strictly decreasing
    let mut lo = (a / z).ln() - 1.0;
    while slope(lo) <= 0.0 {
        lo -= 2.0;
        if lo < -800.0 {
            return Err(Error::Accuracy("tricomi_u: failed to bracket integrand mode".into()));
        }
    }
    let mut hi = lo + 1.0;
    while slope(hi) >= 0.0 {
        hi += 2.0;
        if hi > 800.0 {
            return Err(Error::Accuracy("tricomi_u: failed to bracket integrand mode".into()));
        }
    }
    let mode = brent(|u| Ok(slope(u)), lo, hi, 1e-10, 1e-12, 200)?.root;
    let peak = log_integrand(mode);
    let scaled = |u: f64| Ok((log_integrand(u) - peak).exp());
    let tol = QuadTol::new(0.0, 1e-13);
    let (right, _) = integrate_tail(scaled, mode, 1.0, tol)?;
    let (left, _) = integrate_tail(scaled, mode, -1.0, tol)?;
    let v = (peak - ln_gamma(a)).exp() * (left + right);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Accuracy(format!("tricomi_u({a}, {b}, {z}) overflowed")))
    }
}

/// `ln(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `dM/dz = (a/b) M(a+1, b+1, z)`.
pub fn kummer_m_prime(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(a / b * kummer_m(a + 1.0, b + 1.0, z)?)
}

/// `dU/dz = -a U(a+1, b+1, z)`.
pub fn tricomi_u_prime(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(-a * tricomi_u(a + 1.0, b + 1.0, z)?)
}

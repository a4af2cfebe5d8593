//! Linear diffusions on `(0, ∞)` with generator `½β²(x) d²/dx² + α(x) d/dx`.
//!
//! Two models have closed-form fundamental solutions (geometric Brownian
//! motion and the logistic diffusion); anything else goes through
//! [`DiffusionSpec::custom`], which builds `ψ_ρ` and `φ_ρ` numerically.

mod custom;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{ln_kummer_m, tricomi_u, tricomi_u_prime};

pub use custom::{CustomDiffusion, Coefficient};
use custom::RiccatiTables;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionKind {
    Gbm,
    Logistic,
    Custom,
}

impl fmt::Display for DiffusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffusionKind::Gbm => "gbm",
            DiffusionKind::Logistic => "logistic",
            DiffusionKind::Custom => "custom",
        })
    }
}

/// The state process `X`.
#[derive(Debug, Clone)]
pub enum DiffusionSpec {
    /// Drift `αx`, diffusion coefficient `βx`.
    Gbm { alpha: f64, beta: f64 },
    /// Drift `αx(1 - γx)`, diffusion coefficient `βx`.
    Logistic { alpha: f64, beta: f64, gamma: f64 },
    /// User-supplied drift and diffusion coefficient.
    Custom(CustomDiffusion),
}

fn check_named(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    if !alpha.is_finite() || !(alpha - 0.5 * beta * beta > 0.0) {
        return Err(domain(format!(
            "alpha - beta^2/2 must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(())
}

impl DiffusionSpec {
    pub fn gbm(alpha: f64, beta: f64) -> Result<Self> {
        check_named(alpha, beta)?;
        Ok(DiffusionSpec::Gbm { alpha, beta })
    }

    pub fn logistic(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        check_named(alpha, beta)?;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(domain(format!("gamma must be non-negative, got {gamma}")));
        }
        Ok(DiffusionSpec::Logistic { alpha, beta, gamma })
    }

    /// A diffusion given by its drift `α(x)` and diffusion coefficient `β(x)`.
    /// Both boundaries are assumed natural; `β` must be positive on `(0, ∞)`.
    pub fn custom<D, V>(drift: D, vol: V) -> Result<Self>
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        V: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Ok(DiffusionSpec::Custom(CustomDiffusion::new(Arc::new(drift), Arc::new(vol))?))
    }

    pub fn kind(&self) -> DiffusionKind {
        match self {
            DiffusionSpec::Gbm { .. } => DiffusionKind::Gbm,
            DiffusionSpec::Logistic { .. } => DiffusionKind::Logistic,
            DiffusionSpec::Custom(_) => DiffusionKind::Custom,
        }
    }

    /// Drift coefficient `α(x)`.
    pub fn drift(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::Gbm { alpha, .. } => alpha * x,
            DiffusionSpec::Logistic { alpha, gamma, .. } => alpha * x * (1.0 - gamma * x),
            DiffusionSpec::Custom(c) => c.drift(x),
        }
    }

    /// Diffusion coefficient `β(x)`.
    pub fn volatility(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::Gbm { beta, .. } | DiffusionSpec::Logistic { beta, .. } => beta * x,
            DiffusionSpec::Custom(c) => c.vol(x),
        }
    }

    /// Scale density `S'(x) = exp(-∫^x 2α/β²)`, normalised to 1 at `x = 1`
    /// for custom models.
    pub fn scale_density(&self, x: f64) -> Result<f64> {
        check_state(x)?;
        Ok(match self {
            DiffusionSpec::Gbm { alpha, beta } => x.powf(-2.0 * alpha / (beta * beta)),
            DiffusionSpec::Logistic { alpha, beta, gamma } => {
                let q = 2.0 * alpha / (beta * beta);
                (-q * x.ln() + q * gamma * x).exp()
            }
            DiffusionSpec::Custom(c) => (-c.log_scale_integral(x)).exp(),
        })
    }

    /// Speed density `m'(x) = 2 / (β²(x) S'(x))`.
    pub fn speed_density(&self, x: f64) -> Result<f64> {
        check_state(x)?;
        Ok(match self {
            DiffusionSpec::Gbm { alpha, beta } => {
                let q = 2.0 * alpha / (beta * beta);
                2.0 / (beta * beta * x * x) * x.powf(q)
            }
            DiffusionSpec::Logistic { alpha, beta, gamma } => {
                let q = 2.0 * alpha / (beta * beta);
                2.0 / (beta * beta * x * x) * (q * x.ln() - q * gamma * x).exp()
            }
            DiffusionSpec::Custom(c) => {
                let v = c.vol(x);
                2.0 / (v * v) * c.log_scale_integral(x).exp()
            }
        })
    }

    /// `ln m'(x)`, finite well past the range where `m'` itself under- or overflows.
    pub fn ln_speed_density(&self, x: f64) -> Result<f64> {
        check_state(x)?;
        let lx = x.ln();
        Ok(match self {
            DiffusionSpec::Gbm { alpha, beta } => {
                let q = 2.0 * alpha / (beta * beta);
                (2.0 / (beta * beta)).ln() + (q - 2.0) * lx
            }
            DiffusionSpec::Logistic { alpha, beta, gamma } => {
                let q = 2.0 * alpha / (beta * beta);
                (2.0 / (beta * beta)).ln() + (q - 2.0) * lx - q * gamma * x
            }
            DiffusionSpec::Custom(c) => {
                let v = c.vol(x);
                (2.0 / (v * v)).ln() + c.log_scale_integral(x)
            }
        })
    }

    /// Increasing and decreasing solutions of `𝒜u = ρu`.
    pub fn excessive_basis(&self, rho: f64) -> Result<ExcessiveBasis> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(domain(format!("rho must be positive, got {rho}")));
        }
        let repr = match self {
            DiffusionSpec::Gbm { alpha, beta } => {
                let (b, a) = power_exponents(*alpha, *beta, rho);
                Repr::Power { b, a }
            }
            DiffusionSpec::Logistic { alpha, beta, gamma } => {
                let (b, a) = power_exponents(*alpha, *beta, rho);
                if *gamma == 0.0 {
                    Repr::Power { b, a }
                } else {
                    let q = 2.0 * alpha / (beta * beta);
                    Repr::Confluent { b, kb: 2.0 * b + q, c: q * gamma }
                }
            }
            DiffusionSpec::Custom(c) => Repr::Tabulated(Arc::new(RiccatiTables::build(c, rho)?)),
        };
        let mut basis = ExcessiveBasis {
            spec: self.clone(),
            rho,
            wronskian: 1.0,
            psi_scale: 1.0,
            phi_scale: 1.0,
            repr,
        };
        basis.wronskian = match &basis.repr {
            Repr::Power { b, a } => b - a,
            Repr::Tabulated(t) => t.wronskian(),
            Repr::Confluent { .. } => basis.wronskian_at(1.0)?,
        };
        Ok(basis)
    }
}

/// Roots `b(ρ) > 0 > a(ρ)` of `½β²k(k-1) + αk - ρ = 0`.
pub fn power_exponents(alpha: f64, beta: f64, rho: f64) -> (f64, f64) {
    let s2 = beta * beta;
    let k = 0.5 - alpha / s2;
    let disc = (k * k + 2.0 * rho / s2).sqrt();
    (k + disc, k - disc)
}

fn check_state(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("state must be positive and finite, got {x}")))
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// `ψ = x^b`, `φ = x^a`.
    Power { b: f64, a: f64 },
    /// `ψ = x^b M(b, kb, c x)`, `φ = x^b U(b, kb, c x)`.
    Confluent { b: f64, kb: f64, c: f64 },
    Tabulated(Arc<RiccatiTables>),
}

/// The pair `ψ_ρ`, `φ_ρ` for one diffusion and one rate `ρ`, with the Wronskian
/// `B_ρ = (ψ'φ - φ'ψ)/S'`. Immutable once built.
#[derive(Debug, Clone)]
pub struct ExcessiveBasis {
    spec: DiffusionSpec,
    rho: f64,
    wronskian: f64,
    psi_scale: f64,
    phi_scale: f64,
    repr: Repr,
}

impl ExcessiveBasis {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn wronskian(&self) -> f64 {
        self.wronskian
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    /// The exponents `(b(ρ), a(ρ))` when `ψ`, `φ` are pure powers.
    pub fn power_exponents(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::Power { b, a } => Some((b, a)),
            _ => None,
        }
    }

    /// The same basis with `ψ` multiplied by `psi_factor` and `φ` by `phi_factor`.
    pub fn rescaled(&self, psi_factor: f64, phi_factor: f64) -> Self {
        let mut out = self.clone();
        out.psi_scale *= psi_factor;
        out.phi_scale *= phi_factor;
        out.wronskian *= psi_factor * phi_factor;
        out
    }

    /// `(ln ψ(x), ψ'(x)/ψ(x))`; finite where `ψ` itself overflows.
    pub fn ln_psi_with_slope(&self, x: f64) -> Result<(f64, f64)> {
        check_state(x)?;
        let (v, d) = match &self.repr {
            Repr::Power { b, .. } => (b * x.ln(), b / x),
            Repr::Confluent { b, kb, c } => {
                let z = c * x;
                let ln_m = ln_kummer_m(*b, *kb, z)?;
                // M'(a, b, z) = (a/b) M(a+1, b+1, z)
                let ratio = (ln_kummer_m(b + 1.0, kb + 1.0, z)? - ln_m).exp();
                (b * x.ln() + ln_m, b / x + c * b / kb * ratio)
            }
            Repr::Tabulated(t) => t.psi_log(x),
        };
        Ok((v + self.psi_scale.ln(), d))
    }

    /// `(ln φ(x), φ'(x)/φ(x))`.
    pub fn ln_phi_with_slope(&self, x: f64) -> Result<(f64, f64)> {
        check_state(x)?;
        let (v, d) = match &self.repr {
            Repr::Power { a, .. } => (a * x.ln(), a / x),
            Repr::Confluent { b, kb, c } => {
                let z = c * x;
                let u = tricomi_u(*b, *kb, z)?;
                let du = tricomi_u_prime(*b, *kb, z)?;
                (b * x.ln() + u.ln(), b / x + c * du / u)
            }
            Repr::Tabulated(t) => t.phi_log(x),
        };
        Ok((v + self.phi_scale.ln(), d))
    }

    /// `(ψ(x), ψ'(x))`. Overflows to infinity for the logistic model once
    /// `2αγx/β²` passes roughly 700; use [`Self::ln_psi_with_slope`] there.
    pub fn psi_with_prime(&self, x: f64) -> Result<(f64, f64)> {
        check_state(x)?;
        let (v, d) = match &self.repr {
            Repr::Power { b, .. } => {
                let v = x.powf(*b);
                (v, b * v / x)
            }
            Repr::Confluent { .. } => {
                let (ln_v, slope) = self.ln_psi_with_slope(x)?;
                let v = ln_v.exp();
                return Ok((v, v * slope));
            }
            Repr::Tabulated(t) => t.psi(x),
        };
        Ok((self.psi_scale * v, self.psi_scale * d))
    }

    /// `(φ(x), φ'(x))`.
    pub fn phi_with_prime(&self, x: f64) -> Result<(f64, f64)> {
        check_state(x)?;
        let (v, d) = match &self.repr {
            Repr::Power { a, .. } => {
                let v = x.powf(*a);
                (v, a * v / x)
            }
            Repr::Confluent { b, kb, c } => {
                let xb = x.powf(*b);
                let u = tricomi_u(*b, *kb, c * x)?;
                let du = tricomi_u_prime(*b, *kb, c * x)?;
                (xb * u, b * xb / x * u + xb * c * du)
            }
            Repr::Tabulated(t) => t.phi(x),
        };
        Ok((self.phi_scale * v, self.phi_scale * d))
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        Ok(self.psi_with_prime(x)?.0)
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        match &self.repr {
            Repr::Confluent { b, kb, c } => {
                check_state(x)?;
                Ok(self.phi_scale * x.powf(*b) * tricomi_u(*b, *kb, c * x)?)
            }
            _ => Ok(self.phi_with_prime(x)?.0),
        }
    }

    /// `k ψ(x)`, finite whenever the product is.
    pub fn scaled_psi(&self, k: f64, x: f64) -> Result<f64> {
        if k == 0.0 {
            check_state(x)?;
            return Ok(0.0);
        }
        Ok(k.signum() * (k.abs().ln() + self.ln_psi(x)?).exp())
    }

    /// `ln ψ(x)`.
    pub fn ln_psi(&self, x: f64) -> Result<f64> {
        check_state(x)?;
        let v = match &self.repr {
            Repr::Power { b, .. } => b * x.ln(),
            Repr::Confluent { b, kb, c } => b * x.ln() + ln_kummer_m(*b, *kb, c * x)?,
            Repr::Tabulated(t) => t.ln_psi(x),
        };
        Ok(v + self.psi_scale.ln())
    }

    /// `ln φ(x)`.
    pub fn ln_phi(&self, x: f64) -> Result<f64> {
        check_state(x)?;
        let v = match &self.repr {
            Repr::Power { a, .. } => a * x.ln(),
            Repr::Confluent { b, kb, c } => b * x.ln() + tricomi_u(*b, *kb, c * x)?.ln(),
            Repr::Tabulated(t) => t.ln_phi(x),
        };
        Ok(v + self.phi_scale.ln())
    }

    pub fn psi_prime(&self, x: f64) -> Result<f64> {
        Ok(self.psi_with_prime(x)?.1)
    }

    pub fn phi_prime(&self, x: f64) -> Result<f64> {
        Ok(self.phi_with_prime(x)?.1)
    }

    /// `(ψ'φ - φ'ψ)/S'` evaluated at `x`.
    pub fn wronskian_at(&self, x: f64) -> Result<f64> {
        let (psi, dpsi) = self.psi_with_prime(x)?;
        let (phi, dphi) = self.phi_with_prime(x)?;
        Ok((dpsi * phi - dphi * psi) / self.spec.scale_density(x)?)
    }

    /// Maximum relative deviation of the pointwise Wronskian from `B_ρ` over `grid`.
    pub fn wronskian_check(&self, grid: &[f64]) -> Result<f64> {
        if grid.is_empty() {
            return Err(domain("wronskian_check needs a non-empty grid"));
        }
        grid.iter().try_fold(0.0_f64, |worst, &x| {
            let dev = ((self.wronskian_at(x)? - self.wronskian) / self.wronskian).abs();
            Ok(worst.max(dev))
        })
    }

    /// Relative residuals `|𝒜u - ρu| / (ρ|u|)` for `u = ψ` and `u = φ` at `x`,
    /// with `u''` from a five-point central difference of the exact first derivative.
    pub fn harmonic_residuals(&self, x: f64) -> Result<(f64, f64)> {
        check_state(x)?;
        let residual = |u: &dyn Fn(f64) -> Result<(f64, f64)>| -> Result<f64> {
            let (v, d) = u(x)?;
            // step on the scale over which u changes, so steep tails are resolved
            let h = 1e-4 * x.min((v / d).abs());
            let slope = |k: f64| -> Result<f64> { Ok(u(x + k * h)?.1) };
            let d2 = (8.0 * (slope(1.0)? - slope(-1.0)?) - (slope(2.0)? - slope(-2.0)?)) / (12.0 * h);
            let beta = self.spec.volatility(x);
            let gen = 0.5 * beta * beta * d2 + self.spec.drift(x) * d - self.rho * v;
            Ok((gen / (self.rho * v)).abs())
        };
        Ok((
            residual(&|t| self.psi_with_prime(t))?,
            residual(&|t| self.phi_with_prime(t))?,
        ))
    }
}

/// `n` log-spaced points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (llo + (lhi - llo) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

//! Running payoff functions `h` on `(0, ∞)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Power,
    Affine,
    Saturating,
    Custom,
    Constant,
}

#[derive(Clone)]
enum Shape {
    Power { theta: f64 },
    Affine { slope: f64 },
    Saturating { cap: f64, scale: f64 },
    Constant { level: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A running payoff. The built-in shapes are continuous, non-decreasing,
/// non-constant and vanish at the origin; [`Payoff::constant`] exists for
/// test harnesses and is rejected by [`crate::ProblemParams`].
#[derive(Clone)]
pub struct Payoff {
    shape: Shape,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Power { theta } => write!(f, "Power(theta = {theta})"),
            Shape::Affine { slope } => write!(f, "Affine(slope = {slope})"),
            Shape::Saturating { cap, scale } => {
                write!(f, "Saturating(cap = {cap}, scale = {scale})")
            }
            Shape::Constant { level } => write!(f, "Constant({level})"),
            Shape::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Probe points for limits of custom payoffs.
const PROBE_START: f64 = 1e6;
const PROBE_DOUBLINGS: i32 = 10;
const PROBE_REL_TOL: f64 = 1e-6;

impl Payoff {
    /// `h(x) = x^θ`.
    pub fn power(theta: f64) -> Result<Self> {
        let theta = positive("theta", theta)?;
        Ok(Self { shape: Shape::Power { theta } })
    }

    /// `h(x) = slope · x`.
    pub fn affine(slope: f64) -> Result<Self> {
        let slope = positive("slope", slope)?;
        Ok(Self { shape: Shape::Affine { slope } })
    }

    /// `h(x) = cap · x / (x + scale)`, bounded by `cap`.
    pub fn saturating(cap: f64, scale: f64) -> Result<Self> {
        let cap = positive("cap", cap)?;
        let scale = positive("scale", scale)?;
        Ok(Self { shape: Shape::Saturating { cap, scale } })
    }

    /// Any function assumed continuous, non-decreasing, non-constant and with `h(0+) = 0`.
    /// Only the origin is checked here.
    pub fn custom<F>(f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let at_zero = f(1e-12);
        if !at_zero.is_finite() || at_zero.abs() > 1e-6 {
            return Err(domain(format!("custom payoff must vanish at the origin, h(1e-12) = {at_zero}")));
        }
        Ok(Self { shape: Shape::Custom(Arc::new(f)) })
    }

    /// `h ≡ level`. Violates the standing assumptions; meant for tests.
    pub fn constant(level: f64) -> Self {
        Self { shape: Shape::Constant { level } }
    }

    pub fn kind(&self) -> PayoffKind {
        match self.shape {
            Shape::Power { .. } => PayoffKind::Power,
            Shape::Affine { .. } => PayoffKind::Affine,
            Shape::Saturating { .. } => PayoffKind::Saturating,
            Shape::Constant { .. } => PayoffKind::Constant,
            Shape::Custom(_) => PayoffKind::Custom,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { theta } => x.powf(*theta),
            Shape::Affine { slope } => slope * x,
            Shape::Saturating { cap, scale } => cap * x / (x + scale),
            Shape::Constant { level } => *level,
            Shape::Custom(f) => f(x),
        }
    }

    /// `lim h(x)` as `x → ∞` for the closed-form shapes; `None` for custom payoffs.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        match self.shape {
            Shape::Power { .. } | Shape::Affine { .. } => Some(f64::INFINITY),
            Shape::Saturating { cap, .. } => Some(cap),
            Shape::Constant { level } => Some(level),
            Shape::Custom(_) => None,
        }
    }

    /// Whether `lim h(x) > level`. Custom payoffs are probed at large states;
    /// a probe that neither exceeds `level` nor settles is indeterminate.
    pub fn eventually_exceeds(&self, level: f64) -> Result<bool> {
        if let Some(limit) = self.limit_at_infinity() {
            return Ok(limit > level);
        }
        let mut prev = f64::NAN;
        for k in 0..=PROBE_DOUBLINGS {
            let v = self.eval(PROBE_START * 2f64.powi(k));
            if !v.is_finite() {
                return Err(Error::Indeterminate(format!(
                    "custom payoff is not finite at large states ({v})"
                )));
            }
            if v > level {
                return Ok(true);
            }
            prev = v;
        }
        let before = self.eval(PROBE_START * 2f64.powi(PROBE_DOUBLINGS - 1));
        if (prev - before).abs() <= PROBE_REL_TOL * prev.abs().max(f64::MIN_POSITIVE) {
            Ok(false)
        } else {
            Err(Error::Indeterminate(format!(
                "custom payoff still moving at x = {:e} ({before} -> {prev}); limit unknown",
                PROBE_START * 2f64.powi(PROBE_DOUBLINGS)
            )))
        }
    }

    /// `inf{x : h(x) > level}`. Requires `level ≥ 0` and
    /// [`eventually_exceeds`](Self::eventually_exceeds).
    pub fn break_even(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0) {
            return Err(domain(format!("break-even level must be non-negative, got {level}")));
        }
        if !self.eventually_exceeds(level)? {
            return Err(domain(format!("payoff never exceeds {level}")));
        }
        match &self.shape {
            Shape::Power { theta } => Ok(level.powf(1.0 / theta)),
            Shape::Affine { slope } => Ok(level / slope),
            Shape::Saturating { cap, scale } => Ok(level * scale / (cap - level)),
            Shape::Constant { .. } => Ok(0.0),
            Shape::Custom(f) => {
                let mut hi = 1.0;
                while f(hi) <= level {
                    hi *= 2.0;
                }
                let mut lo = hi;
                while lo > 1e-300 && f(lo) > level {
                    lo *= 0.5;
                }
                if f(lo) > level {
                    return Ok(0.0);
                }
                // bisection in log-state: lo has h <= level, hi has h > level
                for _ in 0..200 {
                    let mid = (lo * hi).sqrt();
                    if f(mid) > level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi / lo - 1.0 < 1e-15 {
                        break;
                    }
                }
                Ok(hi)
            }
        }
    }

    pub(crate) fn is_constant(&self) -> bool {
        matches!(self.shape, Shape::Constant { .. })
    }
}

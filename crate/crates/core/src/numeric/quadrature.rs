#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1], outermost first; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208932299658,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Bisection depth limit for [`adaptive`]; exceeding it is an accuracy error.
pub const MAX_REFINEMENT_LEVELS: u32 = 20;

const MAX_INTERVALS: usize = 4000;
const MAX_TAIL_PANELS: usize = 300;

/// Absolute and relative tolerance. The relative part is measured against
/// `∫|f|`, so integrals that cancel to near zero still terminate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
}

impl QuadTol {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, abs_integral: f64) -> f64 {
        self.abs.max(self.rel * abs_integral)
    }
}

impl Default for QuadTol {
    fn default() -> Self {
        Self::new(1e-300, 1e-12)
    }
}

/// One Gauss–Kronrod (10, 21) panel. Returns `(integral, error estimate, ∫|f|)`.
pub fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = finite(f(center)?, center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = finite(f(center - dx)?, center - dx)?;
        let f2 = finite(f(center + dx)?, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err, resabs))
}

fn finite(v: f64, at: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Accuracy(format!("non-finite integrand value {v} at {at}")))
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive GK21 on a finite interval, bisecting the panel with the
/// largest error estimate until the summed estimate meets `tol`.
///
/// Returns `(integral, ∫|f|)`.
pub fn adaptive<F>(mut f: F, a: f64, b: f64, tol: QuadTol) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (value, err, abs) = gk21(&mut f, a, b)?;
    let mut total_err = err;
    let mut total_abs = abs;
    if total_err <= tol.target(total_abs) {
        return Ok((value, total_abs));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, err, abs, depth: 0 });
    while total_err > tol.target(total_abs) {
        let worst = heap.pop().expect("heap holds at least one panel");
        if worst.depth >= MAX_REFINEMENT_LEVELS || heap.len() >= MAX_INTERVALS {
            return Err(Error::Accuracy(format!(
                "quadrature on [{a}, {b}] exceeded {MAX_REFINEMENT_LEVELS} refinement levels \
                 (error estimate {total_err:e}, target {:e})",
                tol.target(total_abs)
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1, a1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2, a2) = gk21(&mut f, mid, worst.b)?;
        total_err += e1 + e2 - worst.err;
        total_abs += a1 + a2 - worst.abs;
        let depth = worst.depth + 1;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1, abs: a1, depth });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2, abs: a2, depth });
    }
    // re-sum from the panels to shed accumulated update rounding
    let (total, total_abs) = heap
        .iter()
        .fold((0.0, 0.0), |(s, sa), p| (s + p.value, sa + p.abs));
    Ok((total, total_abs))
}

/// Integrates `f` over `[start, ∞)` (when `step > 0`) or `(-∞, start]` (when
/// `step < 0`) by consecutive panels of width `|step|`, stopping once panel
/// contributions are negligible and decaying. The remaining tail is estimated
/// by geometric extrapolation of the last two panels.
///
/// Intended for integrands expressed on a logarithmic state axis, where
/// power-law and exponential decay both become at least geometric per panel.
///
/// Returns `(integral, ∫|f|)`. A non-decaying integrand is reported as a
/// domain error (the integral does not exist).
pub fn integrate_tail<F>(mut f: F, start: f64, step: f64, tol: QuadTol) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert!(step != 0.0 && step.is_finite(), "tail panel width must be finite and non-zero");
    let mut total = 0.0;
    let mut total_abs = 0.0;
    let mut prev: Option<f64> = None;
    let mut ratios: [Option<f64>; 3] = [None; 3];
    let mut left = start;
    for k in 0..MAX_TAIL_PANELS {
        let right = left + step;
        let (lo, hi) = if step > 0.0 { (left, right) } else { (right, left) };
        let (v, a) = match adaptive(&mut f, lo, hi, tol) {
            Ok(r) => r,
            // an integrand that grew until it overflowed is not integrable
            Err(Error::Accuracy(msg)) if prev.is_some_and(|p| p.abs() > 0.0) && msg.contains("non-finite") => {
                return Err(Error::Domain(format!(
                    "integrand grows without bound beyond {start}: not integrable ({msg})"
                )));
            }
            Err(e) => return Err(e),
        };
        total += v;
        total_abs += a;
        if k >= 2 {
            let small = a <= tol.rel * total_abs || a <= tol.abs;
            if let Some(p) = prev {
                if small && v.abs() <= p.abs() {
                    if p != 0.0 {
                        let q = (v / p).abs();
                        if q < 1.0 {
                            total += v * q / (1.0 - q);
                        }
                    }
                    return Ok((total, total_abs));
                }
            }
        }
        // settled geometric decay over three ratios: extrapolate, bounding the
        // error by the recent ratio drift with a safety factor
        let ratio = prev.filter(|&p| p != 0.0).map(|p| v / p);
        ratios = [ratios[1], ratios[2], ratio];
        if let [Some(q0), Some(q1), Some(q2)] = ratios {
            if [q0, q1, q2].iter().all(|q| *q > 0.0 && *q < 1.0) {
                let tail = v * q2 / (1.0 - q2);
                let drift = ((q2 - q1).abs() + (q1 - q0).abs()) / (1.0 - q2);
                if 10.0 * (tail * drift).abs() <= tol.target(total_abs + tail.abs()) {
                    return Ok((total + tail, total_abs + tail.abs()));
                }
            }
        }
        prev = Some(v);
        left = right;
    }
    Err(Error::Domain(format!(
        "integrand does not decay within {MAX_TAIL_PANELS} panels from {start}: not integrable"
    )))
}

//! Monte Carlo evaluation of threshold entry policies.
//!
//! Each path owns two ChaCha8 streams derived from the run seed: stream `2i`
//! drives the diffusion increments and stream `2i + 1` drives the Poisson
//! clock (inter-arrival times, Bernoulli marks and the Brownian-bridge draw
//! that places `X` at each jump). Every draw happens whatever the policy does,
//! so all policies evaluated in one run see the same environment, and a path's
//! outcome depends only on `(seed, i)`.
//!
//! Two formulations are supported:
//!
//! - `Full`: jumps at rate `λ`, discounting at `r`. A jump with a failed mark
//!   ends the path (whether or not the investor is active); a successful one
//!   forces an active investor out.
//! - `Thinned`: jumps at rate `λp`, discounting at `r + (1-p)λ`, no marks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::solver::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Full,
    Thinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartState {
    Idle,
    Active,
}

/// Entry trigger: enter whenever idle and `X ≥ level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Infinity,
}

impl Threshold {
    pub fn level(&self) -> Option<f64> {
        match self {
            Threshold::Finite(v) => Some(*v),
            Threshold::Infinity => None,
        }
    }

    fn ln_level(&self) -> f64 {
        match self {
            Threshold::Finite(v) => v.ln(),
            Threshold::Infinity => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub discount_floor: f64,
    pub formulation: Formulation,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 0,
            dt: 0.01,
            horizon: 200.0,
            discount_floor: 1e-6,
            formulation: Formulation::Full,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.discount_floor > 0.0 && self.discount_floor < 1.0) {
            return Err(Error::Config(format!(
                "discount_floor must lie in (0, 1), got {}",
                self.discount_floor
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate for one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub threshold: Option<f64>,
    pub start: StartState,
    pub formulation: Formulation,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub n_entries_mean: f64,
    /// Fraction of paths ended by a failed mark (always 0 when thinned).
    pub catastrophe_fraction: f64,
    /// Mean discounted entry fees paid per path, with its standard error.
    pub entry_fee_mean: f64,
    pub entry_fee_stderr: f64,
    /// Paths whose discounted fees exceeded `K` times the discounted sum of
    /// their entry opportunities. Must be zero.
    pub fee_bound_violations: usize,
    /// Largest discount factor at which a path was cut off.
    pub truncation_discount: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    value: f64,
    fees: f64,
    fee_cap: f64,
    entries: u32,
}

#[derive(Debug, Clone, Copy)]
struct PolicyState {
    ln_level: f64,
    active: bool,
    out: Outcome,
}

struct PathResult {
    outcomes: Vec<Outcome>,
    catastrophe: bool,
    cutoff_discount: f64,
}

/// Log-state dynamics: exact for GBM, Euler-Maruyama otherwise.
enum Stepper<'a> {
    Exact { drift: f64, vol: f64 },
    Euler(&'a DiffusionSpec),
}

impl Stepper<'_> {
    fn new(spec: &DiffusionSpec) -> Stepper<'_> {
        match spec {
            DiffusionSpec::Gbm { alpha, beta } => {
                Stepper::Exact { drift: alpha - 0.5 * beta * beta, vol: *beta }
            }
            other => Stepper::Euler(other),
        }
    }

    /// `(drift, vol)` of `ln X` at `y`.
    fn local(&self, y: f64) -> (f64, f64) {
        match self {
            Stepper::Exact { drift, vol } => (*drift, *vol),
            Stepper::Euler(spec) => {
                let x = y.exp();
                let s = spec.volatility(x) / x;
                (spec.drift(x) / x - 0.5 * s * s, s)
            }
        }
    }
}

struct Engine<'a> {
    params: &'a ProblemParams,
    stepper: Stepper<'a>,
    cfg: SimConfig,
    rho: f64,
    jump_rate: f64,
    policies: Vec<(f64, StartState)>,
    x0: f64,
}

impl Engine<'_> {
    fn net(&self, y: f64) -> f64 {
        self.params.payoff.eval(y.exp()) - self.params.c
    }

    fn run_path(&self, index: u64) -> PathResult {
        let mut diff_rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        diff_rng.set_stream(2 * index);
        let mut jump_rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        jump_rng.set_stream(2 * index + 1);

        let k = self.params.k;
        let full = self.cfg.formulation == Formulation::Full;
        let draw_gap = |rng: &mut ChaCha8Rng| -> f64 {
            if self.jump_rate > 0.0 {
                let e: f64 = Exp1.sample(rng);
                e / self.jump_rate
            } else {
                f64::INFINITY
            }
        };

        let mut t = 0.0;
        let mut y = self.x0.ln();
        let mut disc = 1.0;
        let mut states: Vec<PolicyState> = self
            .policies
            .iter()
            .map(|&(ln_level, start)| PolicyState {
                ln_level,
                active: start == StartState::Active,
                out: Outcome { fee_cap: if start == StartState::Idle { k } else { 0.0 }, ..Outcome::default() },
            })
            .collect();
        let enter = |states: &mut [PolicyState], y: f64, disc: f64| {
            for s in states.iter_mut() {
                if !s.active && y >= s.ln_level {
                    s.active = true;
                    s.out.entries += 1;
                    s.out.fees += k * disc;
                    s.out.value -= k * disc;
                }
            }
        };
        enter(&mut states, y, disc);

        let mut next_jump = draw_gap(&mut jump_rng);
        let mut catastrophe = false;
        let dt = self.cfg.dt;
        let sqrt_dt = dt.sqrt();
        let mut g = f64::NAN;
        let mut step = 0u64;

        loop {
            if disc < self.cfg.discount_floor || t >= self.cfg.horizon {
                break;
            }
            if states.iter().all(|s| !s.active && s.ln_level == f64::INFINITY) {
                break;
            }
            step += 1;
            let t_next = step as f64 * dt;
            let (mu, sigma) = self.stepper.local(y);
            let z: f64 = StandardNormal.sample(&mut diff_rng);
            let y_next = y + mu * dt + sigma * sqrt_dt * z;

            let mut seg_t = t;
            let mut seg_y = y;
            let mut seg_disc = disc;
            let mut seg_g = g;
            let any_active = |states: &[PolicyState]| states.iter().any(|s| s.active);

            while next_jump <= t_next {
                let tj = next_jump;
                let zb: f64 = StandardNormal.sample(&mut jump_rng);
                let mark: f64 = if full { jump_rng.random() } else { 0.0 };
                next_jump = tj + draw_gap(&mut jump_rng);

                let frac = (tj - t) / dt;
                let bridge_sd = sigma * ((tj - t) * (t_next - tj) / dt).max(0.0).sqrt();
                let yj = y + frac * (y_next - y) + bridge_sd * zb;
                let disc_j = (-self.rho * tj).exp();

                if any_active(&states) {
                    if seg_g.is_nan() {
                        seg_g = self.net(seg_y);
                    }
                    let gj = self.net(yj);
                    let acc = 0.5 * (tj - seg_t) * (seg_disc * seg_g + disc_j * gj);
                    for s in states.iter_mut().filter(|s| s.active) {
                        s.out.value += acc;
                    }
                    seg_g = gj;
                } else {
                    seg_g = f64::NAN;
                }
                seg_t = tj;
                seg_y = yj;
                seg_disc = disc_j;

                if full && mark >= self.params.p {
                    catastrophe = true;
                    break;
                }
                for s in states.iter_mut().filter(|s| s.active) {
                    s.active = false;
                    s.out.fee_cap += k * disc_j;
                }
                enter(&mut states, yj, disc_j);
            }
            if catastrophe {
                break;
            }

            let disc_next = (-self.rho * t_next).exp();
            if any_active(&states) {
                if seg_g.is_nan() {
                    seg_g = self.net(seg_y);
                }
                g = self.net(y_next);
                let acc = 0.5 * (t_next - seg_t) * (seg_disc * seg_g + disc_next * g);
                for s in states.iter_mut().filter(|s| s.active) {
                    s.out.value += acc;
                }
            } else {
                g = f64::NAN;
            }
            t = t_next;
            y = y_next;
            disc = disc_next;
            if states.iter().any(|s| !s.active && y >= s.ln_level) {
                enter(&mut states, y, disc);
                if g.is_nan() {
                    g = self.net(y);
                }
            }
        }
        PathResult {
            outcomes: states.into_iter().map(|s| s.out).collect(),
            catastrophe,
            cutoff_discount: if catastrophe { 0.0 } else { disc },
        }
    }
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().collect::<CompensatedSum>().total() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().total();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Raw per-path results of several policies evaluated on shared randomness.
pub struct PolicyRun {
    policies: Vec<(Threshold, StartState)>,
    formulation: Formulation,
    paths: Vec<PathResult>,
}

impl PolicyRun {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn estimate(&self, policy: usize) -> PolicyEstimate {
        let n = self.paths.len();
        let (threshold, start) = self.policies[policy];
        let values = self.paths.iter().map(move |p| p.outcomes[policy].value);
        let (mean, stderr) = mean_and_stderr(values, n);
        let fees = self.paths.iter().map(move |p| p.outcomes[policy].fees);
        let (entry_fee_mean, entry_fee_stderr) = mean_and_stderr(fees, n);
        let entries: CompensatedSum =
            self.paths.iter().map(|p| p.outcomes[policy].entries as f64).collect();
        let violations = self
            .paths
            .iter()
            .filter(|p| {
                let o = &p.outcomes[policy];
                o.fees > o.fee_cap * (1.0 + 1e-12)
            })
            .count();
        PolicyEstimate {
            threshold: threshold.level(),
            start,
            formulation: self.formulation,
            mean,
            stderr,
            n_paths: n,
            n_entries_mean: entries.total() / n as f64,
            catastrophe_fraction: self.paths.iter().filter(|p| p.catastrophe).count() as f64 / n as f64,
            entry_fee_mean,
            entry_fee_stderr,
            fee_bound_violations: violations,
            truncation_discount: self.paths.iter().map(|p| p.cutoff_discount).fold(0.0, f64::max),
        }
    }

    pub fn estimates(&self) -> Vec<PolicyEstimate> {
        (0..self.policies.len()).map(|i| self.estimate(i)).collect()
    }

    /// Mean and standard error of the path-wise difference `policy a - policy b`.
    pub fn paired_difference(&self, a: usize, b: usize) -> (f64, f64) {
        let diffs = self.paths.iter().map(move |p| p.outcomes[a].value - p.outcomes[b].value);
        mean_and_stderr(diffs, self.paths.len())
    }
}

/// Evaluates several policies on the same simulated environment.
pub fn simulate_policies(
    spec: &DiffusionSpec,
    params: &ProblemParams,
    policies: &[(Threshold, StartState)],
    x0: f64,
    cfg: &SimConfig,
) -> Result<PolicyRun> {
    cfg.validate()?;
    params.validate_rates()?;
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::Config(format!("x0 must be positive, got {x0}")));
    }
    if policies.is_empty() {
        return Err(Error::Config("no policies to simulate".into()));
    }
    for (th, _) in policies {
        if let Threshold::Finite(v) = th {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("threshold must be positive, got {v}")));
            }
        }
    }
    let (rho, jump_rate) = match cfg.formulation {
        Formulation::Full => (params.r, params.lambda),
        Formulation::Thinned => (params.rho_idle(), params.lambda * params.p),
    };
    let engine = Engine {
        params,
        stepper: Stepper::new(spec),
        cfg: *cfg,
        rho,
        jump_rate,
        policies: policies.iter().map(|(th, st)| (th.ln_level(), *st)).collect(),
        x0,
    };
    let paths: Vec<PathResult> =
        (0..cfg.n_paths as u64).into_par_iter().map(|i| engine.run_path(i)).collect();
    Ok(PolicyRun { policies: policies.to_vec(), formulation: cfg.formulation, paths })
}

/// Value of starting idle at `x0` under the given threshold policy.
pub fn simulate_idle_value(
    spec: &DiffusionSpec,
    params: &ProblemParams,
    threshold: Threshold,
    x0: f64,
    cfg: &SimConfig,
) -> Result<PolicyEstimate> {
    Ok(simulate_policies(spec, params, &[(threshold, StartState::Idle)], x0, cfg)?.estimate(0))
}

/// Value of starting active at `x0`, following the threshold policy after the first exit.
pub fn simulate_active_value(
    spec: &DiffusionSpec,
    params: &ProblemParams,
    threshold: Threshold,
    x0: f64,
    cfg: &SimConfig,
) -> Result<PolicyEstimate> {
    Ok(simulate_policies(spec, params, &[(threshold, StartState::Active)], x0, cfg)?.estimate(0))
}

/// Idle-start estimates at thresholds `m · base` with common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub base: f64,
    pub multipliers: Vec<f64>,
    pub estimates: Vec<PolicyEstimate>,
}

impl ThresholdScan {
    /// Whether the estimate at multiplier 1 is at least every other estimate
    /// minus `z` of its standard errors.
    pub fn base_is_optimal(&self, z: f64) -> bool {
        let Some(i) = self.multipliers.iter().position(|&m| m == 1.0) else {
            return false;
        };
        let best = self.estimates[i].mean;
        self.estimates
            .iter()
            .all(|e| best >= e.mean - z * e.stderr)
    }
}

pub fn threshold_suboptimality_scan(
    spec: &DiffusionSpec,
    params: &ProblemParams,
    base: f64,
    x0: f64,
    multipliers: &[f64],
    cfg: &SimConfig,
) -> Result<ThresholdScan> {
    if multipliers.is_empty() || multipliers.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::Config("multipliers must be positive".into()));
    }
    if !multipliers.contains(&1.0) {
        return Err(Error::Config("multipliers must include 1.0".into()));
    }
    let policies: Vec<_> = multipliers
        .iter()
        .map(|m| (Threshold::Finite(m * base), StartState::Idle))
        .collect();
    let run = simulate_policies(spec, params, &policies, x0, cfg)?;
    Ok(ThresholdScan { base, multipliers: multipliers.to_vec(), estimates: run.estimates() })
}

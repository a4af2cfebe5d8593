//! Optimal sequential entry under Poisson forced exits and Bernoulli catastrophe risk.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: Kummer `M`, Tricomi `U` and a log-gamma helper.
//! - [`diffusion`]: scale and speed densities and the minimal excessive functions
//!   `ψ_ρ`, `φ_ρ` of a diffusion on `(0, ∞)`.
//! - [`payoff`]: running payoff functions `h`.
//! - [`resolvent`]: the Green-function representation of `R_ρ h` and its variants.
//! - [`solver`]: the free-boundary system (threshold, coefficients, value functions).
//! - [`simulate`]: a Monte Carlo evaluator for threshold entry policies.
//!
//! ```no_run
//! use entrysolve_core::{DiffusionSpec, Payoff, ProblemParams, solve};
//!
//! let spec = DiffusionSpec::gbm(0.05, 0.25)?;
//! let params = ProblemParams::new(0.1, 1.0, 0.5, 1.0, 1.0, Payoff::power(0.5)?)?;
//! let solution = solve(&spec, &params)?;
//! println!("x* = {:?}", solution.x_star());
//! # Ok::<(), entrysolve_core::Error>(())
//! ```

pub mod diffusion;
mod error;
pub mod numeric;
pub mod payoff;
pub mod resolvent;
pub mod simulate;
pub mod solver;
pub mod special;

pub use diffusion::{DiffusionSpec, ExcessiveBasis};
pub use error::{Error, Result};
pub use payoff::Payoff;
pub use resolvent::{Resolvent, Side};
pub use simulate::{
    simulate_active_value, simulate_idle_value, simulate_policies, threshold_suboptimality_scan, Formulation,
    PolicyEstimate, PolicyRun, SimConfig, StartState, Threshold, ThresholdScan,
};
pub use solver::{
    check_entry_viability, p_independence_audit, solve, solve_threshold, Coefficients, CurvePoint, Diagnostics, Mode,
    ProblemParams, Solution, Viability,
};

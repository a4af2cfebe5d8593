//! Numeric plumbing shared by the solver: quadrature, root bracketing,
//! Hermite interpolation tables and compensated summation.

mod interp;
mod quadrature;
mod roots;
mod sum;

pub use interp::HermiteTable;
pub use quadrature::{adaptive, gk21, integrate_tail, QuadTol, MAX_REFINEMENT_LEVELS};
pub use roots::{brent, RootResult};
pub use sum::CompensatedSum;

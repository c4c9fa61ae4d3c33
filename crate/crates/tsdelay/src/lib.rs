//! Numerical laboratory for delay dynamic equations on time scales.
//!
//! The crate builds up in layers:
//!
//! - [`scale`]: time-scale domains, jump operators, delta calculus on grids;
//! - [`expr`]: a small expression language for coefficients and shifts;
//! - [`shift`]: shift operators, delay functions, and an axiom checker;
//! - [`calculus`]: regressivity, the scale exponential, and delay-aware
//!   integral identities;
//! - [`solver`]: trajectories of `x^Δ(t) = a(t) x(t) + b(t) x(δ₋(h,t)) δ₋^Δ(h,t)`;
//! - [`stability`]: Lyapunov functionals and exponential-stability /
//!   instability certificates checked against simulated trajectories.

pub mod calculus;
pub mod expr;
pub mod scale;
pub mod shift;
pub mod solver;
pub mod stability;

pub use calculus::{CalculusError, RegressiveFunction, RegressivityClass};
pub use expr::Expr;
pub use scale::{GridFunction, ScaleError, ScaleKind, TimeScale};
pub use shift::{builtin_shift, DelayFunction, ShiftDir, ShiftError, ShiftSystem};
pub use solver::{DelayProblem, SolverError, Trajectory};
pub use stability::{
    certify, check_condition_11, check_condition_2_8, check_instability,
    check_literature_conditions, functionals, SearchGrids, StabilityCertificate, StabilityError,
    Verdict,
};

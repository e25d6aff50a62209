//! Closed-loop policies, the cost functional, value-function search over
//! parametric policy families and the dynamic programming check.

mod cost;
mod nelder_mead;
mod policy;
mod value;

pub use cost::{CostFunctions, CostSpec, QuadraticCost};
pub use nelder_mead::{nelder_mead, SimplexOptions, SimplexResult};
pub use policy::{Policy, PolicyFamily};
pub use value::{
    approximate_value, approximate_value_from, bootstrap_stderr, check_dpp, evaluate_cost, Budget, CostEstimate,
    DppReport, RestartSummary, ValueEstimate, ValueProblem,
};

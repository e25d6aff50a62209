//! Measures, metrics, simulation, control and measure calculus for
//! controlled branching McKean-Vlasov diffusions.

pub mod calculus;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod metrics;

pub use error::{Error, Result};

//! Atomic finite measures, Ulam-Harris-Neveu labels and branching
//! configurations with the configuration metric `d_E`.

mod atomic;
mod configuration;
pub mod io;
mod label;

pub use atomic::AtomicMeasure;
pub(crate) use atomic::{check_dims, cmp_points};
pub use configuration::{config_distance, Configuration};
pub(crate) use configuration::euclid;
pub use label::Label;

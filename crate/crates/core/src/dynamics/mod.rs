//! Simulation of controlled branching McKean-Vlasov diffusions.
//!
//! Each replica is one copy of the particle system. Within a step the
//! interaction measure is frozen at the replica average `μ̂` of the previous
//! grid time; particles then move by Euler-Maruyama and branch by thinning a
//! Bernoulli(`γ̄ dt`) candidate stream.

mod checks;
mod families;
mod init;
mod model;
pub mod rng;
mod sim;

pub use checks::{
    check_first_moment_bound, check_path_stability, check_position_sum_bound, check_second_moment_bound,
    check_time_continuity, terminal_count, BoundReport, ContinuityReport, Perturbation, PositionSumReport,
    StabilityReport, StabilityRow,
};
pub use families::{sigmoid, DiffusionFamily, DriftFamily, FamilyModel, OffspringFamily, RateFamily};
pub use init::{Construction, InitLaw};
pub use model::{check_pmf, select_offspring, Assumptions, Coefficients, Growth, Lipschitz, ModelSpec, MAX_OFFSPRING};
pub use sim::{
    empirical_mean, simulate, simulate_observed, Event, FrozenFlow, Interaction, PopulationPath, Recording,
    SimConfig, StepObserver,
};
pub(crate) use sim::lattice_key;

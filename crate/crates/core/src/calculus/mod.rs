//! Cylinder functionals, the generator, the Hamiltonian, Itô residuals and
//! the auxiliary function of the comparison argument.

mod auxiliary;
mod cylinder;
mod generator;
mod ito;

pub use auxiliary::{aux_sublevel_check, exclusion_threshold, AuxFunction, SublevelReport};
pub use cylinder::{
    gauss_legendre, segment_integral, Affine, Bracket, CylinderFunctional, ExpQuadratic, Outer, TestFunction, Wave,
};
pub use generator::{generator_apply, hamiltonian, hamiltonian_lipschitz, ActionGrid, Fields, HamiltonianValue};
pub use ito::{
    gauss_hermite, ito_residual, HalvingReport, ItoCheck, ItoInstance, ItoKind, ItoReport, DEFAULT_RESAMPLES,
};

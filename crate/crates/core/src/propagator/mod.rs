//! The evolution family of the uncoupled second/first-order part, its
//! adjoint, and empirical growth constants.

mod banded;
mod estimate;
mod family;
mod form;

pub use banded::{BandLu, BandMatrix};
pub use estimate::{estimate_m_gamma, GrowthFit, NormSample};
pub use family::{
    adjoint_propagate, cocycle_check, propagate, AdjointMode, EvolutionFamily, IdentityPropagator, Propagator,
    Scheme,
};
pub use form::{assemble_form, DiscreteForm};

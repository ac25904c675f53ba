//! Liouvillian assembly, time evolution and steady states.

mod density;
mod integrate;
mod liouvillian;
mod steady;
mod symmetry;

pub use density::{expectation, DensityState, Diagnostics, PhysicalityTolerance};
pub use integrate::{
    dormand_prince, evolve, evolve_with, krylov_propagate, EvolveOptions, EvolveStats, IntegratorOptions,
    OdeScalar, Propagator, StepStats,
};
pub use liouvillian::{Liouvillian, DEFAULT_MAX_SUPEROPERATOR_DIM};
pub use symmetry::ExchangeReduction;
pub use steady::{steady_state, steady_state_with, SteadyMethod, SteadyStateOptions, SteadyStateReport, Uniqueness};

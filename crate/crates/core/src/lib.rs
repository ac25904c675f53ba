//! Open-system simulation of qubits coupled to a single cavity mode.
//!
//! The crate covers three layers:
//!
//! * [`operator`]: tensor-product operators for a truncated cavity plus qubits
//!   or qutrits, with dense or sparse storage.
//! * [`model`] and [`lindblad`]: Tavis-Cummings style Hamiltonians, their
//!   collapse channels, the vectorised Liouvillian, time evolution and steady
//!   states.
//! * [`superradiance`] and [`multistability`]: the Dicke-ladder emission
//!   problem in closed form and from the full master equation, and the
//!   phase-space analysis of the strongly driven system.
//!
//! Rates are angular frequencies in rad/µs throughout, so times are in µs.
//! [`model::SystemSpec::from_mhz`] is the single place where `f/2π` values in
//! MHz are converted.

// `!(x < tol)` is how NaN gets rejected; quadrature nodes are quoted in full.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod lindblad;
pub mod model;
pub mod multistability;
pub mod operator;
pub mod quadrature;
pub mod superradiance;

pub use error::{Error, Result};
pub use lindblad::{DensityState, Diagnostics, Liouvillian};
pub use model::{LindbladModel, SystemSpec, ThreeLevel};
pub use multistability::{PhaseSpaceGrid, QPeak, SteadyAmplitude};
pub use operator::{ComplexOperator, CsrMatrix, StateVector, C64};
pub use superradiance::{DickeLadderSolution, EffectiveRates};

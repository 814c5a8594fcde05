//! Mechanical derivation of second-, third-, and nth-order effective
//! Hamiltonians for largely detuned, harmonically decomposed quantum
//! Hamiltonians, validated against exact time-dependent propagation.
//!
//! The input model is an interaction-picture Hamiltonian
//! `H(t) = Σ_m (h_m e^{iω_m t} + h_m† e^{−iω_m t})` with distinct positive
//! frequencies given as exact rationals in units of a declared base
//! frequency. Resonance selection (which products of amplitudes survive
//! time-averaging) is exact integer arithmetic; only the final scalar
//! coefficients are converted to floating point.
//!
//! Throughout the crate ħ = 1, amplitudes are in angular-frequency units of
//! the base frequency, and times are in units of 1/(base frequency).

pub mod decomposition;
pub mod dense;
pub mod dynamics;
pub mod dyson;
pub mod effective;
pub mod error;
pub mod expr;
pub mod hilbert;
pub mod jsonio;
pub mod rational;
pub mod scenarios;

pub use error::{Error, Result};

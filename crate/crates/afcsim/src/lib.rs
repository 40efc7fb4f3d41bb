//! Numerical simulator of atomic-frequency-comb (AFC) optical memories with
//! spin-wave storage.
//!
//! The crate models a 1D ensemble of three-level lambda atoms whose
//! inhomogeneous absorption line has been shaped into a frequency comb. A weak
//! input pulse absorbed by the comb re-emerges as an echo after `1/Δ`; a pair
//! of strong control pulses converts the optical excitation to a spin wave and
//! back, delaying the echo on demand by the spin storage time. The modules map
//! onto the physical layers:
//!
//! - [`spectral`] — comb specification and synthesized absorption profiles
//! - [`pulses`] — complex time-domain envelopes (Gaussian input, chirped sech
//!   controls)
//! - [`atoms`] — single-frequency-class three-level dynamics and control-pulse
//!   transfer efficiency
//! - [`collective`] — discrete-atom phasor model of the collective emission,
//!   the fast cross-check for echo timing and dephasing
//! - [`medium`] — 1D Maxwell-Bloch propagation yielding output traces and
//!   absolute efficiencies
//! - [`protocol`] — full storage scenarios and the factorized efficiency model
//! - [`optimize`] — bounded derivative-free tuning of control and comb
//!   parameters
//! - [`scenario`] — declarative run configuration, execution and disk outputs

pub mod atoms;
pub mod collective;
pub mod error;
pub mod medium;
pub mod optimize;
pub mod protocol;
pub mod pulses;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

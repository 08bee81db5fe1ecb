//! Sensitivity limits for qubit sensors of power-law correlated dephasing
//! noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`noise_model`] builds the spatial dephasing coefficient matrix and its
//!   symmetric square root.
//! - [`dynamics`] evolves register states under Markovian and factorized
//!   `1/f^p` dephasing, exactly.
//! - [`qfi`] holds the quantum Fisher information machinery: SLD QFI, the
//!   short-time rate, entangled and separable optima, and the advantage ratio.
//! - [`pulse_filter`] computes filter functions, dephasing coefficients for
//!   π-pulse sequences, and the optimal shot time.
//! - [`scaling`] sweeps the sensor count and fits scaling exponents.
//! - [`mc`] is the independent verification layer (trajectory sampling,
//!   Lindblad integration, fidelity-based QFI).
//! - [`verify`] bundles oracle-vs-closed-form batteries used by the CLI.

pub mod error;
pub mod special;
pub mod quadrature;
pub mod golden;
pub mod linalg;
pub mod io;

pub mod noise_model;
pub mod dynamics;
pub mod qfi;
pub mod pulse_filter;
pub mod scaling;
pub mod mc;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used for all density matrices.
pub type C64 = num_complex::Complex64;

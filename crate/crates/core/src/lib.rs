//! Inverse acoustic medium scattering in two dimensions.
//!
//! The crate couples a discretized Lippmann–Schwinger forward solver with
//! four iterative regularized reconstructions of the contrast `q`:
//!
//! * full-data Levenberg–Marquardt ([`filters::flm_step`]),
//! * Kalman-filter Levenberg–Marquardt ([`filters::kfl_sweep`]),
//! * the iterative extended Kalman filter ([`filters::ekf_sweep`]),
//!
//! where the Kalman variants either reset the state-space weight every outer
//! iteration or carry it over ([`filters::WeightPolicy`]).
//!
//! Module map:
//!
//! * [`specfun`]: `J0`, `Y0`, `J1`, `Y1`, `H0^(1)`.
//! * [`grid`]: sampling grid, medium fields, phantoms, angle sets, metrics.
//! * [`forward`]: Green matrix, total field, far field, Fréchet derivative.
//! * [`filters`]: Kalman update, Tikhonov, sweeps, Morozov selector.
//! * [`experiments`]: measurement synthesis, reconstruction runs, harnesses.
//! * [`config`] and [`cli`]: scenario files and the `scatter-kalman` front end.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod config;
mod error;
pub mod experiments;
pub mod filters;
pub mod forward;
pub mod grid;
pub mod io;
pub mod specfun;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

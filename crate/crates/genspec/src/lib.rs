//! Trajectory-free multiscale analysis of Ito drift-diffusion systems.
//!
//! The library discretizes the Fokker-Planck operator of an SDE and its
//! adjoint by spectral collocation, extracts fast fibres as level-set
//! components of a leading eigenfunction, estimates the timescale
//! separation from fibre-restricted spectra, and reconstructs the reduced
//! slow SDE on a transverse section from spectral data alone. No
//! trajectory integration is involved anywhere in the main pipeline; a
//! small Euler-Maruyama stepper exists only as a validation oracle.

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod fibre;
pub mod frames;
pub mod generator;
pub mod reduction;
pub mod sde;
pub mod spectra;

pub use error::GenspecError;

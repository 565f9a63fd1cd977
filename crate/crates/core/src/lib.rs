//! Dynamical periodic steady states of a driven, dissipative double quantum
//! dot coupled to a piezo-electric phonon bath.
//!
//! The reduced density matrix is expanded over a finite set of purely
//! imaginary Laplace poles; the residues follow from a homogeneous linear
//! system whose coefficients are boundary values of the bath's generalized
//! spectral density. The dressing frame is chosen self-consistently so that
//! bath-induced dispersive shifts cancel, which renormalizes the detuning and
//! Rabi frequency.
//!
//! Modules, bottom up:
//! - [`spectral`]: `J`, its Hilbert transform `F`, `F'(0)` and the bath correlation.
//! - [`model`]: bare/dressed frames and Floquet coupling tables.
//! - [`renorm`]: self-consistent renormalization of detuning and Rabi frequency.
//! - [`poles`]: residue system, Markovian baseline, steady-state observables.
//! - [`oracle`]: independent time-domain integrator of the Born master equation.
//! - [`sweep`] and [`config`]: bias sweeps, spectrum tables, CSV output.

pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod poles;
pub mod quad;
pub mod renorm;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{BareFrame, DqdParams, DressedFrame};
pub use spectral::{BathSpectrum, Branch, Spectrum};

//! Quantum-fidelity (Loschmidt echo) simulations of a trapped 1D
//! Bose–Einstein condensate perturbed by weak random potentials.

pub mod analysis;
pub mod checkpoint;
pub mod echo;
pub mod error;
pub mod grid;
pub mod harness;
pub mod parallel;
pub mod physics;
pub mod propagator;
pub mod spectral;

pub use error::{Error, Result};

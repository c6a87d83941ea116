//! Gaussian wave packets of the logarithmic Schrödinger equation in rotating
//! anisotropic harmonic traps: the ansatz flow, its stationary points and
//! their stability, and a split-step field solver to check them against.

pub mod error;
pub mod export;
pub mod model;
pub mod ode;
pub mod pde;
pub mod stability;
pub mod stationary;

pub use nalgebra;
pub use num_complex;

pub use error::{Error, Result};
pub use model::{GaussonState, Stability, StationaryPoint, SymMatrix, TrapConfig};

//! Variational state estimation for linear-Gaussian and jump Gauss–Markov systems.

pub mod error;
pub mod exact;
pub mod experiments;
pub mod gaussian;
pub mod io;
pub mod linear;
pub mod verify;
pub mod vjgm;

pub use error::{Error, Result};

//! Numerical and symbolic laboratory for Cahn-Hilliard and Allen-Cahn
//! dynamics on manifolds with conical singularities.

pub mod assembly;
pub mod asymptotics;
pub mod banded;
pub mod cli;
pub mod cone_symbol;
pub mod cross_section;
pub mod error;
pub mod exact;
pub mod evolve;
pub mod extensions;
pub mod mellin;
pub mod spectral_lab;

pub use error::{Error, Result};

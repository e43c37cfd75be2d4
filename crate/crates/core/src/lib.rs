//! Pseudo-spectral simulation of the focusing nonlinear Klein–Gordon equation
//! `u_tt - Δu + m²u = |u|^p u` on a periodic box, with diagnostics for its
//! conservation laws, cone functionals, blowup behaviour and profile
//! decompositions.

pub mod blowup;
pub mod cones;
pub mod conslaws;
pub mod error;
pub mod grid;
pub mod norms;
pub mod profiles;
pub mod series;
pub mod solver;

pub use error::{Error, Result};

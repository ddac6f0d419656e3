//! Determinants of twisted discrete Laplacians on flat surfaces.

pub mod asymptotics;
pub mod constants;
pub mod continuum;
pub mod error;
pub mod geom;
pub mod keyformula;
pub mod lattice;
pub mod modeldomains;
pub mod operator;
pub mod special;
pub mod spectral;
pub mod surface;

pub use error::{Error, Result};

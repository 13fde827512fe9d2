//! Normalized solutions of the (2,q)-Laplacian equation
//! `−Δu − Δ_q u + λu = α|u|^{p−2}u` with prescribed `L²` mass, on radial grids.

pub mod cli;
pub mod error;
pub mod functionals;
pub mod minimize;
pub mod params;
pub mod radial;
pub mod scaling;
pub mod shoot;

pub use error::{Error, Result};

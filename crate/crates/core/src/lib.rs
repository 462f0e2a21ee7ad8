//! Exact construction and verification of the multi-indexed (q-)Racah
//! polynomials.

pub mod casoratian;
pub mod crum;
pub mod error;
pub mod highprec;
pub mod lattice;
pub mod mi;
pub mod params;
pub mod poly;
pub mod scalar;
pub mod verify;
pub mod virtual_sector;

pub use error::{Error, Result};
pub use params::{Family, ParameterSet, ShiftVector, Site};
pub use scalar::ExactScalar;

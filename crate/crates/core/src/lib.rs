pub mod error;
pub mod evolve;
pub mod exec;
pub mod fields;
pub mod fixtures;
pub mod functionals;
pub mod biot_savart;
pub mod kernel;
pub mod quad;
pub mod rearrange;
pub mod travelwave;

pub use error::{Error, Result};

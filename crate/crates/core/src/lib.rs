pub mod analysis;
pub mod discretization;
pub mod error;
pub mod numerics;
pub mod reduction;
pub mod sections;
pub mod system;

pub use error::{Error, Result};

pub mod analytic;
pub mod cli;
pub mod constants;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod linalg;
pub mod material;
pub mod modes;
pub mod quadrature;
pub mod quantum;
pub mod response;

pub use error::{Error, Result};

pub mod config;
pub mod error;
pub mod geometry;
pub mod langevin;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};

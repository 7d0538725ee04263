pub mod analysis;
pub mod circuit;
pub mod cmaes;
pub mod derivative;
pub mod error;
pub mod evolution;
pub mod qops;
pub mod quadrature;
pub mod rng;
pub mod schedule;
pub mod training;

pub use error::{Error, Result};

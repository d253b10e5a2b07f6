pub mod bc;
pub mod blowup;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod profiles;
pub mod quadrature;
pub mod runner;
pub mod solver;
pub mod sym;
pub mod verify;
pub mod weiss;

pub use error::{Error, Result};

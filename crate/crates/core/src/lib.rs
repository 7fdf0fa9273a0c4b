//! Integer-fluxonium modelling toolkit.

pub mod budget;
pub mod cli;
pub mod circuit;
pub mod devices;
pub mod error;
pub mod fluxon;
pub mod linalg;
pub mod pulse;
pub mod rb;
pub mod simplex;
pub mod spectro;

pub use error::{Error, Result};

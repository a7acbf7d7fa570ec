//! Spectral solver for a Schrodinger equation in the unit infinite well with
//! a nonlinear term proportional to the time derivative of the density.

pub mod basis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod oracles;
pub mod potentials;

pub use error::{Error, Result};

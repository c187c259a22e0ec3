//! Simulation, file formats and command line tooling on top of `molrate-core`.

pub mod error;
pub mod experiment;
pub mod io;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use molrate_core as core;

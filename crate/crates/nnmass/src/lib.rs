//! File formats, checkpoints, the parallel sweep runner and the command
//! line for `nnmass-core`.

pub mod checkpoint;
pub mod cli;
mod error;
pub mod files;
pub mod sweep;

pub use error::{Error, Result};

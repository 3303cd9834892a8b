//! Topology metrics for deep networks with concatenation-type long-range
//! links, plus the numerical machinery used to study them.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and an explicit 64-bit seed; file formats, the
//! command line and the parallel sweep runner live in the `nnmass` crate.
//!
//! - [`topology`]: architecture specs, cell density, NN-Density, NN-Mass,
//!   average degree and sampled shortcut realizations.
//! - [`randmat`]: Gaussian matrices, singular values, and the mean-singular-value
//!   versus mass simulations.
//! - [`network`]: a from-scratch MLP wired by a realization, with backprop,
//!   layerwise Jacobians and SGD training.
//! - [`datasets`]: Seg-n / Circle-n generators and the IDX codec.
//! - [`analysis`]: parameter and FLOP accounting, sweeps and least-squares fits.
//! - [`design`]: inverting NN-Mass to choose shortcut budgets without training.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod datasets;
pub mod design;
mod error;
pub mod instrument;
pub mod network;
pub mod randmat;
mod ratio;
pub mod rng;
pub mod topology;

pub use error::{Error, IdxPart, Result};
pub use topology::{Activation, ArchitectureSpec, CellSpec, MassReport, TopologyRealization};

//! Simulation and parameter extraction for gate-tunable Josephson parametric
//! amplifiers built around a Kerr resonator with two-photon loss.
//!
//! Angular frequencies and rates are rad/s internally; file formats and the
//! command line use Hz and dBm.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplifier;
pub mod cli;
pub mod constants;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod fitkit;
pub mod interp;
pub mod io;
pub mod noise;

pub use error::{Error, Result};

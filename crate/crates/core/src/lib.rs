//! Read-margin and read-power simulation of memristive crossbar memories
//! under sneak-path currents.
//!
//! The crate is layered bottom-up:
//!
//! - [`device`]: cell I-V models and threshold state dynamics
//! - [`crossbar`]: biased network construction for a read
//! - [`solver`]: sparse damped Newton DC solve
//! - [`readout`]: paired LRS/HRS reads, read margin and power
//! - [`sweep`]: parameter sweeps emitting CSV rows
//! - [`config`] and [`cli`]: the `xbar` command-line front end

pub mod cli;
pub mod config;
pub mod crossbar;
pub mod device;
pub mod readout;
pub mod solver;
pub mod sweep;

pub use crossbar::{
    build, sense_resistance, worst_case_target, CellDesign, CellState, CrossbarConfig, Network,
    Pattern, Scheme, Variant,
};
pub use device::{CellModel, DeviceParams, DeviceState, SelectorParams};
pub use readout::{read, ReadResult};
pub use solver::{solve, Solution, SolveOptions};

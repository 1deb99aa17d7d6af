//! Simulation and control of a manipulator on a moving base: coupling-integrated
//! task-space model, UDE-based motion/force controllers, wall contact world,
//! closed-loop simulator and an ablation harness.

pub mod bench;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod kinodyn;
pub mod sigproc;
pub mod sim;
pub mod world;

pub use error::{Error, Result};

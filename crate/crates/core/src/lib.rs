//! Time- and power-splitting policies for energy-harvesting transmitters whose
//! battery efficiency degrades with charge and discharge rate.
//!
//! Modules, bottom up: [`battery`] physics, [`frame`] rate and energy
//! accounting, [`single_frame`] closed-form optimizer, [`offline`] multi-frame
//! convex solver, [`online`] causal policies, and [`harness`] experiments.

pub mod battery;
pub mod error;
pub mod exec;
pub mod frame;
pub mod harness;
pub mod offline;
pub mod online;
pub mod random;
pub mod scalar;
pub mod single_frame;

pub use battery::{BatteryModel, EfficiencyModel};
pub use error::{Error, Result};
pub use frame::{FrameDecision, FrameSpec, NoiseModel};

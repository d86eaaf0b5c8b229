//! Simulation of prethermal discrete time crystals in dipolar spin clusters
//! driven by pulse trains and a weak AC field.
//!
//! The numerical core is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the experiment drivers use.

pub mod analysis;
pub mod experiments;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod propagator;
pub mod scalar;
pub mod sequence;

pub use scalar::{Real, C};

pub type SpinGraph64 = lattice::SpinGraph<f64>;
pub type PulseSchedule64 = sequence::PulseSchedule<f64>;
pub type AcDrive64 = sequence::AcDrive<f64>;
pub type Disorder64 = sequence::DisorderRealization<f64>;

//! Cramér-Rao bounds and estimators for target position and velocity from
//! frequency-hopped slow-time radar observations over multistatic and
//! monostatic layouts.
//!
//! Bound computations are generic over [`scalar::Scalar`]; the aliases
//! below fix them to `f64`, which the estimators and experiments use.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fisher;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod schedule;
pub mod signal;
pub mod waveform;

pub use error::{Error, Result};

pub type Vec2 = linalg::Vec2<f64>;
pub type Mat2 = linalg::Mat2<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type NetworkLayout = geometry::NetworkLayout<f64>;
pub type TargetState = geometry::TargetState<f64>;
pub type PathGeometry = geometry::PathGeometry<f64>;
pub type HopSchedule = schedule::HopSchedule<f64>;
pub type ScheduleMoments = schedule::ScheduleMoments<f64>;
pub type WaveformSpec = waveform::WaveformSpec<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type NetworkFim = fisher::NetworkFim<f64>;
pub type CrlbResult = fisher::CrlbResult<f64>;

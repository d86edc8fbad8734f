//! Quantum image generator with learned noise injection and intensity
//! calibration, trained adversarially against a WGAN-GP critic.
//!
//! The numerical core (circuit simulation, calibration, networks, metrics)
//! is generic over [`Scalar`]; data handling and the training loop run on
//! `f64`. The aliases below name the `f64` instantiations.

pub mod calibration;
pub mod config;
pub mod critic;
pub mod data;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod quantum;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Real = f64;
pub type Circuit = quantum::CircuitParams<f64>;
pub type State = quantum::ComplexState<f64>;
pub type Distribution = quantum::ConditionalDistribution<f64>;
pub type Encoder = encoder::NoiseEncoder<f64>;
pub type Calibration = calibration::CalibrationConfig<f64>;
pub type Critic = critic::Critic<f64>;
pub type Generator = training::Generator<f64>;

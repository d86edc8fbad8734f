//! Statevector simulation of the generator circuit.

mod adjoint;
mod circuit;
mod measure;
mod state;

pub use adjoint::{forward, QuantumGradients, QuantumTape};
pub use circuit::{apply_circuit, Axis, CircuitParams, Gate, RotationSet};
pub use measure::{conditional_probs, ConditionalDistribution, ACCEPTANCE_FLOOR};
pub use state::{prepare_state, ComplexState};

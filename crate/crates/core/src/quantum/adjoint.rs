//! Exact reverse-mode gradients through the statevector.
//!
//! The forward pass keeps only the final state. The backward pass walks the
//! gate list in reverse, uncomputing the state and the adjoint vector together
//! (one copy of each), so memory stays at two statevectors regardless of depth.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::circuit::{apply_gate, Axis, CircuitParams, Gate};
use super::measure::{conditional_probs, ConditionalDistribution};
use super::state::{prepare_state, ComplexState};

#[derive(Debug, Clone)]
struct Recorded<T> {
    z: Vec<T>,
    params: CircuitParams<T>,
    final_state: ComplexState<T>,
    dist: ConditionalDistribution<T>,
}

/// Forward record needed by [`QuantumTape::backward`].
#[derive(Debug, Clone, Default)]
pub struct QuantumTape<T> {
    recorded: Option<Recorded<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGradients<T> {
    /// `∂loss/∂zᵢ` for the state-preparation angles.
    pub z: Vec<T>,
    /// `∂loss/∂ω` in the flat layout of [`CircuitParams::angles`].
    pub angles: Vec<T>,
}

/// Runs preparation, the ansatz and post-selection, recording into `tape`.
pub fn forward<T: Scalar>(
    z: &[T],
    params: &CircuitParams<T>,
    tape: &mut QuantumTape<T>,
) -> Result<ConditionalDistribution<T>> {
    tape.recorded = None;
    let state = prepare_state(z, params.num_data_qubits())?;
    let final_state = super::circuit::apply_circuit(state, params)?;
    let dist = conditional_probs(&final_state)?;
    tape.recorded = Some(Recorded {
        z: z.to_vec(),
        params: params.clone(),
        final_state,
        dist: dist.clone(),
    });
    Ok(dist)
}

impl<T: Scalar> QuantumTape<T> {
    pub fn is_recorded(&self) -> bool {
        self.recorded.is_some()
    }

    pub fn clear(&mut self) {
        self.recorded = None;
    }

    /// Pulls `∂loss/∂probs` back to the preparation angles and circuit angles.
    pub fn backward(&self, grad_probs: &[T]) -> Result<QuantumGradients<T>> {
        let rec = self.recorded.as_ref().ok_or(Error::MissingTape("quantum circuit"))?;
        let n = rec.dist.len();
        if grad_probs.len() != n {
            return Err(Error::Shape {
                context: "quantum backward upstream gradient",
                expected: n,
                actual: grad_probs.len(),
            });
        }

        // p_i = |ψ_i|² / A  ⇒  ∂L/∂|ψ_i|² = (g_i − Σ_j g_j p_j) / A
        let probs = rec.dist.probs();
        let acceptance = rec.dist.acceptance();
        let centered: T = grad_probs.iter().zip(probs).map(|(&g, &p)| g * p).sum();

        let mut phi = rec.final_state.clone();
        let zero = Complex::new(T::zero(), T::zero());
        let lambda_amps: Vec<Complex<T>> = phi
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i < n {
                    a.scale((grad_probs[i] - centered) / acceptance)
                } else {
                    zero
                }
            })
            .collect();
        let mut lambda = ComplexState::from_amplitudes(phi.num_data_qubits(), lambda_amps)?;

        // With λ = ∂L/∂ψ*, a gate exp(-iθP/2) contributes Im⟨λ|P|φ⟩ where
        // both vectors are taken just after the gate.
        let mut grad_angles = vec![T::zero(); rec.params.angles().len()];
        for gate in rec.params.gates().into_iter().rev() {
            if let Gate::Rotation { qubit, axis, param } = gate {
                grad_angles[param] = grad_angles[param] + lambda.pauli_inner(&phi, qubit, axis).im;
            }
            apply_gate(&mut phi, gate, rec.params.angles(), true);
            apply_gate(&mut lambda, gate, rec.params.angles(), true);
        }

        let mut grad_z = vec![T::zero(); rec.z.len()];
        for q in (0..rec.z.len()).rev() {
            grad_z[q] = lambda.pauli_inner(&phi, q, Axis::Y).im;
            phi.apply_ry(q, -rec.z[q]);
            lambda.apply_ry(q, -rec.z[q]);
        }

        Ok(QuantumGradients {
            z: grad_z,
            angles: grad_angles,
        })
    }
}

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::state::ComplexState;

/// Smallest ancilla-0 mass accepted before post-selection is declared degenerate.
pub const ACCEPTANCE_FLOOR: f64 = 1e-6;

/// Data-register distribution conditioned on the ancilla reading `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution<T> {
    probs: Vec<T>,
    acceptance: T,
}

impl<T: Scalar> ConditionalDistribution<T> {
    /// Builds a distribution from an explicit probability vector, which must
    /// be non-negative and sum to one within `1e-9`.
    pub fn from_probs(probs: Vec<T>, acceptance: T) -> Result<Self> {
        if probs.len() < 2 || !probs.len().is_power_of_two() {
            return Err(Error::Config(format!(
                "distribution length {} is not a power of two >= 2",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::Config("probabilities must be finite and non-negative".into()));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
        }
        if !(acceptance > T::zero() && acceptance <= T::one() + T::lit(1e-12)) {
            return Err(Error::Config(format!("acceptance {acceptance} outside (0, 1]")));
        }
        Ok(Self { probs, acceptance })
    }

    /// Uniform distribution over `n` outcomes with acceptance one.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_probs(vec![T::one() / T::from_usize_lossy(n); n], T::one())
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn acceptance(&self) -> T {
        self.acceptance
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Post-selects the ancilla on `0` and renormalizes the data register.
pub fn conditional_probs<T: Scalar>(state: &ComplexState<T>) -> Result<ConditionalDistribution<T>> {
    let n = 1usize << state.num_data_qubits();
    let block = &state.amplitudes()[..n];
    let joint: Vec<T> = block.iter().map(|a| a.norm_sqr()).collect();
    let acceptance: T = joint.iter().copied().sum();
    if !(acceptance > T::lit(ACCEPTANCE_FLOOR)) {
        return Err(Error::DegeneratePostSelection {
            acceptance: acceptance.to_f64().unwrap_or(f64::NAN),
            floor: ACCEPTANCE_FLOOR,
        });
    }
    let probs = joint.into_iter().map(|p| p / acceptance).collect();
    Ok(ConditionalDistribution { probs, acceptance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn disentangled_ancilla_has_full_acceptance() {
        let state = super::super::prepare_state(&[0.7_f64, -1.3], 2).unwrap();
        let dist = conditional_probs(&state).unwrap();
        assert!((dist.acceptance() - 1.0).abs() < 1e-14);
        for (i, p) in dist.probs().iter().enumerate() {
            assert!((p - state.amplitudes()[i].norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_superposition_is_uniform_with_half_acceptance() {
        let d = 3;
        let amp = 1.0 / ((1 << (d + 1)) as f64).sqrt();
        let state = ComplexState::from_amplitudes(d, vec![Complex::new(amp, 0.0); 1 << (d + 1)]).unwrap();
        let dist = conditional_probs(&state).unwrap();
        assert!((dist.acceptance() - 0.5).abs() < 1e-14);
        assert!(dist.probs().iter().all(|p| (p - 0.125).abs() < 1e-14));
    }

    #[test]
    fn ancilla_in_one_is_degenerate() {
        let mut amps = vec![Complex::new(0.0_f64, 0.0); 4];
        amps[2] = Complex::new(1.0, 0.0);
        let state = ComplexState::from_amplitudes(1, amps).unwrap();
        assert!(matches!(
            conditional_probs(&state),
            Err(Error::DegeneratePostSelection { .. })
        ));
    }
}

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense amplitude vector over `D` data qubits plus one ancilla.
///
/// Basis index layout: bit `q` of the index is the value of qubit `q`, data
/// qubits occupy bits `0..D` and the ancilla is the highest-order bit `D`.
/// The ancilla-0 block is therefore the first `2^D` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState<T> {
    amplitudes: Vec<Complex<T>>,
    num_data_qubits: usize,
}

impl<T: Scalar> ComplexState<T> {
    /// `|0…0⟩` on `num_data_qubits + 1` qubits.
    pub fn zero(num_data_qubits: usize) -> Result<Self> {
        if num_data_qubits == 0 {
            return Err(Error::Config("at least one data qubit is required".into()));
        }
        if num_data_qubits > 24 {
            return Err(Error::Config(format!(
                "{num_data_qubits} data qubits exceed the dense simulator limit of 24"
            )));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << (num_data_qubits + 1)];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self {
            amplitudes,
            num_data_qubits,
        })
    }

    /// Wraps raw amplitudes. The length must be `2^(D+1)`; normalization is
    /// the caller's responsibility.
    pub fn from_amplitudes(num_data_qubits: usize, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let expected = 1usize << (num_data_qubits + 1);
        if num_data_qubits == 0 || amplitudes.len() != expected {
            return Err(Error::Shape {
                context: "ComplexState amplitudes",
                expected,
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            num_data_qubits,
        })
    }

    pub fn num_data_qubits(&self) -> usize {
        self.num_data_qubits
    }

    pub fn num_qubits(&self) -> usize {
        self.num_data_qubits + 1
    }

    pub fn ancilla_index(&self) -> usize {
        self.num_data_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of reading `1` on `qubit`.
    pub fn marginal_one(&self, qubit: usize) -> T {
        let mask = 1usize << qubit;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `R_y(θ) = exp(-iθY/2)` on `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, theta: T) {
        let half = theta / T::lit(2.0);
        let (s, c) = half.sin_cos();
        self.for_each_pair(qubit, |a0, a1| {
            let (x0, x1) = (*a0, *a1);
            *a0 = x0.scale(c) - x1.scale(s);
            *a1 = x0.scale(s) + x1.scale(c);
        });
    }

    /// `R_z(θ) = exp(-iθZ/2)` on `qubit`.
    pub fn apply_rz(&mut self, qubit: usize, theta: T) {
        let half = theta / T::lit(2.0);
        let (s, c) = half.sin_cos();
        let neg = Complex::new(c, -s);
        let pos = Complex::new(c, s);
        self.for_each_pair(qubit, |a0, a1| {
            *a0 = *a0 * neg;
            *a1 = *a1 * pos;
        });
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// `⟨self|P|other⟩` for the Pauli generator `P` of a rotation on `qubit`.
    pub(crate) fn pauli_inner(&self, other: &Self, qubit: usize, axis: super::Axis) -> Complex<T> {
        let stride = 1usize << qubit;
        let mut acc = Complex::new(T::zero(), T::zero());
        let lhs = self.amplitudes.chunks(stride << 1);
        let rhs = other.amplitudes.chunks(stride << 1);
        for (lb, rb) in lhs.zip(rhs) {
            let (l0, l1) = lb.split_at(stride);
            let (r0, r1) = rb.split_at(stride);
            for i in 0..stride {
                let term = match axis {
                    // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
                    super::Axis::Y => {
                        l0[i].conj() * Complex::new(r1[i].im, -r1[i].re)
                            + l1[i].conj() * Complex::new(-r0[i].im, r0[i].re)
                    }
                    super::Axis::Z => l0[i].conj() * r0[i] - l1[i].conj() * r1[i],
                };
                acc = acc + term;
            }
        }
        acc
    }

    fn for_each_pair(&mut self, qubit: usize, mut f: impl FnMut(&mut Complex<T>, &mut Complex<T>)) {
        let stride = 1usize << qubit;
        for block in self.amplitudes.chunks_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }
}

/// `⊗ᵢ R_y(zᵢ)|0⟩` on the data register, ancilla left in `|0⟩`.
pub fn prepare_state<T: Scalar>(z: &[T], num_data_qubits: usize) -> Result<ComplexState<T>> {
    if z.len() != num_data_qubits {
        return Err(Error::Config(format!(
            "noise vector has {} entries but the circuit has {} data qubits",
            z.len(),
            num_data_qubits
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("noise vector contains non-finite angles".into()));
    }
    let mut state = ComplexState::zero(num_data_qubits)?;
    for (q, &angle) in z.iter().enumerate() {
        state.apply_ry(q, angle);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_angles_leave_ground_state() {
        let s = prepare_state(&[0.0_f64], 1).unwrap();
        assert_eq!(s.amplitudes()[0], Complex::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn pi_rotation_flips_data_qubit() {
        let s = prepare_state(&[PI], 1).unwrap();
        assert!((s.marginal_one(0) - 1.0).abs() < 1e-15);
        assert!(s.marginal_one(1).abs() < 1e-15);
    }

    #[test]
    fn marginals_follow_half_angle_sine() {
        // Direct 2x2 products: R_y(θ)|0⟩ = (cos θ/2, sin θ/2).
        let z = [PI / 2.0, PI / 3.0];
        let s = prepare_state(&z, 2).unwrap();
        let q0 = (PI / 4.0).sin().powi(2);
        let q1 = (PI / 6.0).sin().powi(2);
        assert!((q0 - 0.5).abs() < 1e-15 && (q1 - 0.25).abs() < 1e-15);
        assert!((s.marginal_one(0) - q0).abs() < 1e-14);
        assert!((s.marginal_one(1) - q1).abs() < 1e-14);
        assert!(s.marginal_one(2).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        assert!(matches!(prepare_state(&[0.1_f64, 0.2], 3), Err(Error::Config(_))));
    }

    #[test]
    fn f32_state_prepares() {
        let s = prepare_state(&[1.0_f32, 2.0], 2).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
    }
}

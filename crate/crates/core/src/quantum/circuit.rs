use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::state::ComplexState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Y,
    Z,
}

/// Trainable rotations applied to every qubit in every layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationSet {
    /// `R_y` only.
    Y,
    /// `R_y` followed by `R_z`.
    #[default]
    YZ,
}

impl RotationSet {
    pub fn per_qubit(self) -> usize {
        match self {
            RotationSet::Y => 1,
            RotationSet::YZ => 2,
        }
    }

    pub fn axes(self) -> &'static [Axis] {
        match self {
            RotationSet::Y => &[Axis::Y],
            RotationSet::YZ => &[Axis::Y, Axis::Z],
        }
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            1 => Some(RotationSet::Y),
            2 => Some(RotationSet::YZ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// Rotation about `axis` whose angle is `angles[param]`.
    Rotation { qubit: usize, axis: Axis, param: usize },
    Cnot { control: usize, target: usize },
}

/// Angles and layout of the layered ansatz.
///
/// Each layer rotates every qubit (data and ancilla) and then applies the
/// layer's CNOT list in order. Angles are stored flat as
/// `[layer][qubit][rotation]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams<T> {
    num_data_qubits: usize,
    layers: usize,
    rotations: RotationSet,
    angles: Vec<T>,
    entanglers: Vec<Vec<(usize, usize)>>,
}

impl<T: Scalar> CircuitParams<T> {
    /// Linear-chain ansatz: CNOT(q, q+1) for `q = 0..D`, the last one
    /// targeting the ancilla. All angles start at zero.
    pub fn linear_chain(num_data_qubits: usize, layers: usize, rotations: RotationSet) -> Result<Self> {
        let chain: Vec<(usize, usize)> = (0..num_data_qubits).map(|q| (q, q + 1)).collect();
        Self::with_entanglers(num_data_qubits, layers, rotations, vec![chain; layers])
    }

    pub fn with_entanglers(
        num_data_qubits: usize,
        layers: usize,
        rotations: RotationSet,
        entanglers: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        if num_data_qubits == 0 {
            return Err(Error::Config("circuit needs at least one data qubit".into()));
        }
        if layers == 0 {
            return Err(Error::Config("circuit needs at least one layer".into()));
        }
        if entanglers.len() != layers {
            return Err(Error::Shape {
                context: "entangler map layers",
                expected: layers,
                actual: entanglers.len(),
            });
        }
        let n = num_data_qubits + 1;
        for (l, pairs) in entanglers.iter().enumerate() {
            for &(c, t) in pairs {
                if c >= n || t >= n || c == t {
                    return Err(Error::Config(format!(
                        "layer {l}: invalid CNOT ({c}, {t}) on {n} qubits"
                    )));
                }
            }
        }
        Ok(Self {
            num_data_qubits,
            layers,
            rotations,
            angles: vec![T::zero(); layers * n * rotations.per_qubit()],
            entanglers,
        })
    }

    /// Draws every angle uniformly from `[-π, π)`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for a in &mut self.angles {
            *a = T::lit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        }
    }

    pub fn num_data_qubits(&self) -> usize {
        self.num_data_qubits
    }

    pub fn num_qubits(&self) -> usize {
        self.num_data_qubits + 1
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn rotations(&self) -> RotationSet {
        self.rotations
    }

    pub fn entanglers(&self) -> &[Vec<(usize, usize)>] {
        &self.entanglers
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [T] {
        &mut self.angles
    }

    pub fn set_angles(&mut self, angles: &[T]) -> Result<()> {
        if angles.len() != self.angles.len() {
            return Err(Error::Shape {
                context: "circuit angles",
                expected: self.angles.len(),
                actual: angles.len(),
            });
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("circuit angles must be finite".into()));
        }
        self.angles.copy_from_slice(angles);
        Ok(())
    }

    /// Flat index of the angle for (`layer`, `qubit`, `rotation`).
    pub fn angle_index(&self, layer: usize, qubit: usize, rotation: usize) -> usize {
        (layer * self.num_qubits() + qubit) * self.rotations.per_qubit() + rotation
    }

    /// Gate sequence in application order.
    pub fn gates(&self) -> Vec<Gate> {
        let mut out = Vec::with_capacity(self.angles.len() + self.layers * self.num_data_qubits);
        for l in 0..self.layers {
            for q in 0..self.num_qubits() {
                for (r, &axis) in self.rotations.axes().iter().enumerate() {
                    out.push(Gate::Rotation {
                        qubit: q,
                        axis,
                        param: self.angle_index(l, q, r),
                    });
                }
            }
            for &(control, target) in &self.entanglers[l] {
                out.push(Gate::Cnot { control, target });
            }
        }
        out
    }
}

pub(crate) fn apply_gate<T: Scalar>(state: &mut ComplexState<T>, gate: Gate, angles: &[T], inverse: bool) {
    match gate {
        Gate::Rotation { qubit, axis, param } => {
            let theta = if inverse { -angles[param] } else { angles[param] };
            match axis {
                Axis::Y => state.apply_ry(qubit, theta),
                Axis::Z => state.apply_rz(qubit, theta),
            }
        }
        Gate::Cnot { control, target } => state.apply_cnot(control, target),
    }
}

/// Returns `U(ω)|ψ⟩`.
pub fn apply_circuit<T: Scalar>(mut state: ComplexState<T>, params: &CircuitParams<T>) -> Result<ComplexState<T>> {
    if state.num_data_qubits() != params.num_data_qubits() {
        return Err(Error::Shape {
            context: "circuit vs state data qubits",
            expected: params.num_data_qubits(),
            actual: state.num_data_qubits(),
        });
    }
    for gate in params.gates() {
        apply_gate(&mut state, gate, params.angles(), false);
    }
    Ok(state)
}

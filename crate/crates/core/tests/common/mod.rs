//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qpix::quantum::{Axis, CircuitParams, RotationSet};
use rand::Rng;

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ry(t: f64) -> CMat {
    let (s, co) = (t / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

fn rz(t: f64) -> CMat {
    let (s, co) = (t / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co, -s), c(0.0, 0.0), c(0.0, 0.0), c(co, s)])
}

/// `I ⊗ … ⊗ G ⊗ … ⊗ I` with `G` on `qubit`; qubit 0 is the least
/// significant bit of the basis index.
fn embed(g: &CMat, qubit: usize, n: usize) -> CMat {
    let hi = CMat::identity(1 << (n - 1 - qubit), 1 << (n - 1 - qubit));
    let lo = CMat::identity(1 << qubit, 1 << qubit);
    hi.kronecker(g).kronecker(&lo)
}

fn cnot(control: usize, target: usize, n: usize) -> CMat {
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for j in 0..dim {
        let i = if j >> control & 1 == 1 { j ^ (1 << target) } else { j };
        m[(i, j)] = c(1.0, 0.0);
    }
    m
}

/// Full circuit unitary (preparation included) as a dense matrix product.
pub fn dense_unitary(z: &[f64], params: &CircuitParams<f64>) -> CMat {
    let d = params.num_data_qubits();
    let n = d + 1;
    let mut u = CMat::identity(1 << n, 1 << n);
    for (q, &zq) in z.iter().enumerate() {
        u = embed(&ry(zq), q, n) * u;
    }
    let axes = params.rotations().axes();
    for l in 0..params.layers() {
        for q in 0..n {
            for (r, axis) in axes.iter().enumerate() {
                let t = params.angles()[params.angle_index(l, q, r)];
                let g = match axis {
                    Axis::Y => ry(t),
                    Axis::Z => rz(t),
                };
                u = embed(&g, q, n) * u;
            }
        }
        for &(ctl, tgt) in &params.entanglers()[l] {
            u = cnot(ctl, tgt, n) * u;
        }
    }
    u
}

/// Post-selected distribution by brute force: first column of the dense
/// unitary, restricted to ancilla 0, renormalized.
pub fn dense_conditional(z: &[f64], params: &CircuitParams<f64>) -> (Vec<f64>, f64) {
    let u = dense_unitary(z, params);
    let half = 1 << params.num_data_qubits();
    let mass: Vec<f64> = (0..half).map(|i| u[(i, 0)].norm_sqr()).collect();
    let a: f64 = mass.iter().sum();
    (mass.iter().map(|m| m / a).collect(), a)
}

pub fn random_circuit<R: Rng>(d: usize, layers: usize, rot: RotationSet, rng: &mut R) -> CircuitParams<f64> {
    let mut p = CircuitParams::linear_chain(d, layers, rot).unwrap();
    p.randomize(rng);
    p
}

pub fn random_angles<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let x0 = x[i];
    x[i] = x0 + h;
    let up = f(x);
    x[i] = x0 - h;
    let down = f(x);
    x[i] = x0;
    (up - down) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

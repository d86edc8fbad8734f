mod common;

use common::*;
use proptest::prelude::*;
use qpix::quantum::{self, apply_circuit, conditional_probs, prepare_state, CircuitParams, QuantumTape, RotationSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn statevector_matches_dense_matrix_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=3 {
        for rot in [RotationSet::Y, RotationSet::YZ] {
            for _ in 0..20 {
                let params = random_circuit(d, 3, rot, &mut rng);
                let z = random_angles(d, &mut rng);
                let state = apply_circuit(prepare_state(&z, d).unwrap(), &params).unwrap();
                let u = dense_unitary(&z, &params);
                for (i, a) in state.amplitudes().iter().enumerate() {
                    assert!((a - u[(i, 0)]).norm() < 1e-12, "d={d} amp {i}");
                }
            }
        }
    }
}

#[test]
fn custom_entanglers_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = CircuitParams::with_entanglers(3, 2, RotationSet::YZ, vec![vec![(2, 0), (3, 1)], vec![(1, 3)]]).unwrap();
    p.randomize(&mut rng);
    let z = random_angles(3, &mut rng);
    let got = quantum::forward(&z, &p, &mut QuantumTape::default()).unwrap();
    let (want, acc) = dense_conditional(&z, &p);
    assert!((got.acceptance() - acc).abs() < 1e-12);
    for (g, w) in got.probs().iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}

fn loss_grad_check(d: usize, layers: usize, rot: RotationSet, seed: u64, weights: &[f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = random_circuit(d, layers, rot, &mut rng);
    let mut z = random_angles(d, &mut rng);
    let loss = |z: &[f64], p: &CircuitParams<f64>| -> f64 {
        let dist = quantum::forward(z, p, &mut QuantumTape::default()).unwrap();
        dist.probs().iter().zip(weights).map(|(p, w)| p * w).sum()
    };
    let mut tape = QuantumTape::default();
    quantum::forward(&z, &params, &mut tape).unwrap();
    let g = tape.backward(weights).unwrap();

    let mut angles = params.angles().to_vec();
    for i in 0..angles.len() {
        let fd = central_diff(&mut angles, i, 1e-5, |a| {
            let mut p = params.clone();
            p.set_angles(a).unwrap();
            loss(&z, &p)
        });
        assert!(rel_err(g.angles[i], fd, 1e-6) < 1e-5, "angle {i}: {} vs {fd}", g.angles[i]);
    }
    params.set_angles(&angles).unwrap();
    for i in 0..d {
        let fd = central_diff(&mut z, i, 1e-5, |zz| loss(zz, &params));
        assert!(rel_err(g.z[i], fd, 1e-6) < 1e-5, "z {i}: {} vs {fd}", g.z[i]);
    }
}

#[test]
fn adjoint_gradients_match_finite_differences() {
    for seed in 0..5 {
        loss_grad_check(2, 2, RotationSet::YZ, seed, &[1.0, 0.0, 0.0, 0.0]);
        loss_grad_check(3, 2, RotationSet::Y, seed, &[0.3, -1.0, 2.0, 0.0, 0.5, 0.1, -0.7, 1.2]);
        loss_grad_check(4, 3, RotationSet::YZ, seed, &(0..16).map(|i| (i as f64).sin()).collect::<Vec<_>>());
    }
}

#[test]
fn backward_requires_forward() {
    let tape = QuantumTape::<f64>::default();
    assert!(matches!(tape.backward(&[0.0; 4]), Err(qpix::Error::MissingTape(_))));
}

#[test]
fn zero_ansatz_prepares_product_state() {
    // With ω = 0 and no entanglers the data register is ⊗ R_y(zᵢ)|0⟩.
    let p = CircuitParams::<f64>::with_entanglers(2, 1, RotationSet::YZ, vec![vec![]]).unwrap();
    let z = [0.4f64, 1.3];
    let dist = quantum::forward(&z, &p, &mut QuantumTape::default()).unwrap();
    let (c0, s0) = ((z[0] / 2.0).cos().powi(2), (z[0] / 2.0).sin().powi(2));
    let (c1, s1) = ((z[1] / 2.0).cos().powi(2), (z[1] / 2.0).sin().powi(2));
    let want = [c0 * c1, s0 * c1, c0 * s1, s0 * s1];
    for (g, w) in dist.probs().iter().zip(want) {
        assert!((g - w).abs() < 1e-14);
    }
    assert!((dist.acceptance() - 1.0).abs() < 1e-14);
}

#[test]
fn degenerate_post_selection_is_an_error() {
    // R_y(π) on the ancilla moves all mass to ancilla 1.
    let mut p = CircuitParams::with_entanglers(1, 1, RotationSet::Y, vec![vec![]]).unwrap();
    let idx = p.angle_index(0, 1, 0);
    p.angles_mut()[idx] = PI;
    let state = apply_circuit(prepare_state(&[0.2], 1).unwrap(), &p).unwrap();
    assert!(matches!(
        conditional_probs(&state),
        Err(qpix::Error::DegeneratePostSelection { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_form_a_distribution(seed in any::<u64>(), d in 1usize..5, layers in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_circuit(d, layers, RotationSet::YZ, &mut rng);
        let z = random_angles(d, &mut rng);
        let state = apply_circuit(prepare_state(&z, d).unwrap(), &p).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        if let Ok(dist) = conditional_probs(&state) {
            prop_assert!(dist.probs().iter().all(|&x| x >= 0.0));
            prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(dist.acceptance() > 0.0 && dist.acceptance() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn probabilities_are_two_pi_periodic(seed in any::<u64>(), which in 0usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_circuit(2, 2, RotationSet::YZ, &mut rng);
        let z = random_angles(2, &mut rng);
        let mut shifted = p.clone();
        let i = which % p.angles().len();
        shifted.angles_mut()[i] += 2.0 * PI;
        let a = quantum::forward(&z, &p, &mut QuantumTape::default()).unwrap();
        let b = quantum::forward(&z, &shifted, &mut QuantumTape::default()).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

mod common;

use common::*;
use proptest::prelude::*;
use qpix::critic::{Critic, CriticConfig};
use qpix::nn::{Activation, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_critic(seed: u64, input: usize, hidden: Vec<usize>) -> Critic<f64> {
    let cfg = CriticConfig {
        hidden,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Critic::init(input, &cfg, &mut rng).unwrap();
    // Non-zero biases so the leaky kinks sit away from the origin.
    for p in c.params_mut() {
        *p += rng.random_range(-0.2..0.2);
    }
    c
}

fn batch<R: Rng>(rng: &mut R, n: usize, w: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..w).map(|_| rng.random()).collect()).collect()
}

fn with_params(c: &Critic<f64>, p: &[f64]) -> Critic<f64> {
    let mut c = c.clone();
    c.params_mut().copy_from_slice(p);
    c
}

#[test]
fn penalty_parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (seed, input, hidden) in [(1, 4, vec![5]), (2, 16, vec![6, 4]), (3, 9, vec![])] {
        let c = small_critic(seed, input, hidden);
        let points = batch(&mut rng, 3, input);
        let mut grads = vec![0.0; c.params().len()];
        c.penalty_at(&points, Some(&mut grads)).unwrap();
        let mut p = c.params().to_vec();
        for i in 0..p.len() {
            let fd = central_diff(&mut p, i, 1e-6, |pp| with_params(&c, pp).penalty_at(&points, None).unwrap());
            assert!(rel_err(grads[i], fd, 1e-6) < 1e-3, "param {i}: {} vs {fd}", grads[i]);
        }
    }
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = small_critic(4, 8, vec![6, 5]);
    let real = batch(&mut rng, 4, 8);
    let fake = batch(&mut rng, 4, 8);
    let points = Critic::interpolate(&real, &fake, &mut rng);
    let (_, grads) = c.critic_loss_at(&real, &fake, &points).unwrap();
    let mut p = c.params().to_vec();
    for i in 0..p.len() {
        let fd = central_diff(&mut p, i, 1e-6, |pp| {
            with_params(&c, pp).critic_loss_at(&real, &fake, &points).unwrap().0.loss
        });
        assert!(rel_err(grads[i], fd, 1e-6) < 1e-3, "param {i}: {} vs {fd}", grads[i]);
    }
}

#[test]
fn input_gradient_and_penalty_match_numeric_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = small_critic(5, 6, vec![7, 3]);
    let pts = batch(&mut rng, 4, 6);
    let mut want = 0.0;
    for x in &pts {
        let (_, g) = c.score_with_input_grad(x).unwrap();
        let mut xx = x.clone();
        let mut sq = 0.0;
        for i in 0..6 {
            let fd = central_diff(&mut xx, i, 1e-6, |v| c.score_one(v).unwrap());
            assert!((g[i] - fd).abs() < 1e-8);
            sq += fd * fd;
        }
        want += (sq.sqrt() - 1.0).powi(2);
    }
    want *= c.lambda_gp() / pts.len() as f64;
    assert!((c.penalty_at(&pts, None).unwrap() - want).abs() < 1e-6);
}

#[test]
fn linear_critic_penalties() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let lin = |w: &[f64]| {
        let mut net = Mlp::zeros(&[w.len(), 1], Activation::LeakyRelu(0.2)).unwrap();
        net.layer_mut(0).0.copy_from_slice(w);
        Critic::from_network(net, 10.0).unwrap()
    };
    let real = batch(&mut rng, 5, 4);
    let fake = batch(&mut rng, 5, 4);
    assert_eq!(lin(&[0.0, 0.6, 0.0, 0.8]).gradient_penalty(&real, &fake, &mut rng).unwrap(), 0.0);
    let p = lin(&[2.0, 0.0, 1.0, 2.0]).gradient_penalty(&real, &fake, &mut rng).unwrap();
    assert!((p - 40.0).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn penalty_nonnegative_and_estimate_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = small_critic(seed, 5, vec![4]);
        let real = batch(&mut rng, 3, 5);
        let fake = batch(&mut rng, 3, 5);
        let pts = Critic::interpolate(&real, &fake, &mut rng);
        let (a, _) = c.critic_loss_at(&real, &fake, &pts).unwrap();
        let (b, _) = c.critic_loss_at(&fake, &real, &pts).unwrap();
        prop_assert!(a.penalty >= 0.0);
        prop_assert!((a.wasserstein_estimate + b.wasserstein_estimate).abs() < 1e-12);
    }
}

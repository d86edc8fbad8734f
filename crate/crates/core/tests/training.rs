mod common;

use common::*;
use qpix::calibration::{CalibrationConfig, Stage};
use qpix::config::{Ablation, TrainConfig};
use qpix::critic::CriticConfig;
use qpix::data::{CriticView, DatasetSpec, ImageBatch, ImageSet};
use qpix::encoder::{sample_latent, EncoderConfig, EncoderOutputGrad, EncoderTape, NoiseEncoder};
use qpix::quantum::RotationSet;
use qpix::training::checkpoint::{self, CheckpointData};
use qpix::training::{
    load_checkpoint, restore_checkpoint, save_checkpoint, Generator, GeneratorInput, NoiseSource, OutputMapping,
    ParamGroup, SampleTape, Trainer,
};
use qpix::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_set(n: usize, side: usize, seed: u64) -> ImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..n)
        .map(|_| {
            // A bright blob on a dark background, jittered.
            (0..side * side)
                .map(|k| {
                    let (y, x) = ((k / side) as f64, (k % side) as f64);
                    let c = (side as f64 - 1.0) / 2.0;
                    let r2 = (y - c).powi(2) + (x - c).powi(2);
                    ((-r2 / side as f64).exp() + 0.1 * rng.random::<f64>()).min(1.0)
                })
                .collect()
        })
        .collect();
    ImageSet {
        images: ImageBatch::new(side, side, pixels).unwrap(),
        source_indices: (0..n).collect(),
        view: CriticView::full(side),
    }
}

fn small_config(d: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        data_qubits: d,
        layers: 2,
        critic: CriticConfig {
            hidden: vec![16, 8],
            ..Default::default()
        },
        encoder: EncoderConfig {
            hidden: vec![8],
            ..Default::default()
        },
        epochs: 4,
        seed,
        ..Default::default()
    }
}

fn trainer(d: usize, seed: u64) -> Trainer {
    Trainer::new(small_config(d, seed), CriticView::full(1 << (d / 2))).unwrap()
}

fn all_params(t: &Trainer) -> Vec<u64> {
    t.generator
        .encoder
        .params()
        .iter()
        .chain(t.generator.circuit.angles())
        .chain(t.critic.params())
        .chain(&t.adam_critic.m)
        .chain(&t.adam_critic.v)
        .chain(&t.adam_encoder.v)
        .chain(&t.adam_circuit.v)
        .map(|v| v.to_bits())
        .collect()
}

#[test]
fn one_epoch_on_ten_images_gives_finite_log() {
    let set = toy_set(10, 4, 0);
    let mut t = trainer(4, 1);
    let log = t.train_epoch(&set).unwrap();
    for v in [
        log.wasserstein,
        log.critic_loss,
        log.generator_loss,
        log.penalty,
        log.acceptance,
        log.brightness,
        log.contrast,
    ] {
        assert!(v.is_finite());
    }
    assert_eq!(log.epoch, 0);
    assert_eq!(t.epoch, 1);
    assert!(log.acceptance > 0.0 && log.acceptance <= 1.0);
}

#[test]
fn schedule_counts_for_a_thousand_images() {
    let set = toy_set(1000, 2, 1);
    let mut cfg = small_config(2, 2);
    cfg.critic.hidden = vec![4];
    cfg.layers = 1;
    let mut t = Trainer::new(cfg, CriticView::full(2)).unwrap();
    t.train_epoch(&set).unwrap();
    assert_eq!(t.counters.generator_steps, 200);
    assert_eq!(t.counters.critic_steps, 1000);
}

#[test]
fn ragged_last_batch_still_counts() {
    let set = toy_set(12, 4, 1);
    let mut t = trainer(4, 2);
    t.train_epoch(&set).unwrap();
    assert_eq!(t.counters.generator_steps, 3);
    assert_eq!(t.counters.critic_steps, 15);
}

#[test]
fn each_group_is_updated_only_with_its_own_rate() {
    let set = toy_set(15, 4, 2);
    let mut t = trainer(4, 3);
    t.train_epoch(&set).unwrap();
    t.train_epoch(&set).unwrap();
    let c = t.counters;
    assert_eq!(c.group(ParamGroup::Critic).steps, c.critic_steps);
    assert_eq!(c.group(ParamGroup::Encoder).steps, c.generator_steps);
    assert_eq!(c.group(ParamGroup::Circuit).steps, c.generator_steps);
    assert_eq!(c.group(ParamGroup::Critic).base_lr, t.config.lr_critic);
    assert_eq!(c.group(ParamGroup::Encoder).base_lr, t.config.lr_encoder);
    assert_eq!(c.group(ParamGroup::Circuit).base_lr, t.config.lr_pqc);
    assert_eq!(t.adam_circuit.step, c.generator_steps);
    assert_eq!(t.adam_critic.step, c.critic_steps);
}

#[test]
fn fixed_seed_runs_are_bit_identical() {
    let set = toy_set(20, 4, 3);
    let run = || {
        let mut t = trainer(4, 9);
        let logs: Vec<_> = (0..2).map(|_| t.train_epoch(&set).unwrap()).collect();
        (t, logs)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(all_params(&a), all_params(&b));
    for (x, y) in la.iter().zip(&lb) {
        assert_eq!(x.wasserstein.to_bits(), y.wasserstein.to_bits());
        assert_eq!(x.generator_loss.to_bits(), y.generator_loss.to_bits());
        assert_eq!(x.brightness.to_bits(), y.brightness.to_bits());
    }
    let (c, _) = {
        let mut t = trainer(4, 10);
        let l = t.train_epoch(&set).unwrap();
        (t, l)
    };
    assert_ne!(all_params(&a), all_params(&c));
}

#[test]
fn checkpoint_resume_equals_uninterrupted_training() {
    let set = toy_set(20, 4, 4);
    let spec = DatasetSpec::new("imgs", "labels", 4);
    let mut straight = trainer(4, 5);
    straight.train_epoch(&set).unwrap();
    straight.train_epoch(&set).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    let mut first = trainer(4, 5);
    first.train_epoch(&set).unwrap();
    save_checkpoint(&first, &spec, &path).unwrap();
    drop(first);
    let (mut resumed, run) = load_checkpoint(&path).unwrap();
    assert_eq!(run.data, spec);
    assert_eq!(resumed.epoch, 1);
    resumed.train_epoch(&set).unwrap();
    assert_eq!(all_params(&straight), all_params(&resumed));
    assert_eq!(straight, resumed);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let set = toy_set(10, 4, 5);
    let spec = DatasetSpec::new("a", "b", 4);
    let mut t = trainer(4, 6);
    t.train_epoch(&set).unwrap();
    let data = checkpoint::snapshot(&t, &spec);
    let decoded = CheckpointData::decode(&data.encode()).unwrap();
    assert_eq!(decoded, data);
    let (back, _) = checkpoint::trainer_from(&decoded).unwrap();
    assert_eq!(back, t);
}

#[test]
fn corrupted_or_mismatched_checkpoints_leave_state_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec::new("a", "b", 4);
    let good = dir.path().join("good.bin");
    save_checkpoint(&trainer(4, 7), &spec, &good).unwrap();
    let bytes = std::fs::read(&good).unwrap();

    let mut target = trainer(4, 8);
    let before = target.clone();
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("flipped", {
            let mut b = bytes.clone();
            let mid = b.len() / 2;
            b[mid] ^= 0x40;
            b
        }),
        ("truncated", bytes[..bytes.len() - 20].to_vec()),
        ("magic", {
            let mut b = bytes.clone();
            b[0] = b'X';
            b
        }),
        ("version", {
            let mut b = bytes.clone();
            b[8] = 9;
            b
        }),
    ];
    for (name, b) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, b).unwrap();
        let err = restore_checkpoint(&mut target, &p).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{name}: {err}");
        assert_eq!(target, before, "{name}");
    }

    let other = dir.path().join("d6.bin");
    let mut bigger = small_config(6, 1);
    bigger.layers = 3;
    save_checkpoint(&Trainer::new(bigger, CriticView::full(8)).unwrap(), &spec, &other).unwrap();
    assert!(restore_checkpoint(&mut target, &other).is_err());
    assert_eq!(target, before);
    assert!(!dir.path().join("good.tmp").exists());
}

#[test]
fn uniform_noise_ablation_draws_angles_from_unit_interval() {
    let mut cfg = small_config(4, 11);
    cfg.ablation = Ablation::NoiseUniform01;
    let t = Trainer::new(cfg, CriticView::full(4)).unwrap();
    assert_eq!(t.generator.noise, NoiseSource::Uniform01);
    let samples = t.generate(2000, 1).unwrap();
    let zs: Vec<f64> = samples.iter().flat_map(|s| s.z.clone()).collect();
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / zs.len() as f64;
    assert!(zs.iter().all(|z| (0.0..1.0).contains(z)));
    assert!((mean - 0.5).abs() < 0.02 && (var - 1.0 / 12.0).abs() < 0.01, "{mean} {var}");
    // (α, β) still vary with the latent sample.
    assert!(samples.iter().any(|s| s.alpha != samples[0].alpha));
}

#[test]
fn gauss_noise_ablation_is_standard_normal() {
    let mut cfg = small_config(4, 12);
    cfg.ablation = Ablation::NoiseGauss;
    let t = Trainer::new(cfg, CriticView::full(4)).unwrap();
    let zs: Vec<f64> = t.generate(2000, 2).unwrap().iter().flat_map(|s| s.z.clone()).collect();
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / zs.len() as f64;
    assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.08, "{mean} {var}");
    assert!(zs.iter().any(|z| z.abs() > std::f64::consts::PI));
}

#[test]
fn ablation_modes_wire_through() {
    let mut cfg = small_config(4, 13);
    cfg.ablation = Ablation::MapMax;
    let t = Trainer::new(cfg.clone(), CriticView::full(4)).unwrap();
    assert_eq!(t.generator.mapping, OutputMapping::MaxNormalize);
    let px = &t.generate(1, 0).unwrap()[0].pixels;
    assert!(px.iter().any(|&p| p == 1.0));
    cfg.ablation = Ablation::CalibKnockout(Stage::Smoothing);
    let t = Trainer::new(cfg, CriticView::full(4)).unwrap();
    assert!(!t.generator.calibration.stages.smoothing && t.generator.calibration.stages.affine);
}

/// Central differences on `loss = mean pixel` for every generator parameter.
fn generator_fd_check(mapping: OutputMapping, noise: NoiseSource, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Generator::init(
        2,
        1,
        RotationSet::YZ,
        &EncoderConfig {
            hidden: vec![5],
            ..Default::default()
        },
        CalibrationConfig::default(),
        &mut rng,
    )
    .unwrap();
    g.mapping = mapping;
    g.noise = noise;
    let input = g.draw_input(&mut rng);
    let loss = |g: &Generator<f64>, input: &GeneratorInput<f64>| {
        let px = g.forward(input, None).unwrap().pixels;
        px.iter().sum::<f64>() / px.len() as f64
    };
    let mut tape = SampleTape::default();
    g.forward(&input, Some(&mut tape)).unwrap();
    let grads = g.backward(&tape, &[0.25; 4]).unwrap();

    let mut enc = g.encoder.params().to_vec();
    for i in 0..enc.len() {
        let fd = central_diff(&mut enc, i, 1e-6, |p| {
            let mut h = g.clone();
            h.encoder.params_mut().copy_from_slice(p);
            loss(&h, &input)
        });
        assert!(rel_err(grads.encoder[i], fd, 1e-6) < 1e-3, "encoder {i}: {} vs {fd}", grads.encoder[i]);
    }
    let mut ang = g.circuit.angles().to_vec();
    for i in 0..ang.len() {
        let fd = central_diff(&mut ang, i, 1e-6, |p| {
            let mut h = g.clone();
            h.circuit.set_angles(p).unwrap();
            loss(&h, &input)
        });
        assert!(rel_err(grads.angles[i], fd, 1e-6) < 1e-3, "angle {i}: {} vs {fd}", grads.angles[i]);
    }
}

#[test]
fn generator_gradients_match_finite_differences() {
    for seed in 0..4 {
        generator_fd_check(OutputMapping::Calibrated, NoiseSource::Learned, seed);
        generator_fd_check(OutputMapping::MaxNormalize, NoiseSource::Learned, seed);
        generator_fd_check(OutputMapping::Calibrated, NoiseSource::Uniform01, seed);
    }
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let enc = NoiseEncoder::<f64>::init(4, &EncoderConfig::default(), &mut rng).unwrap();
        let a = sample_latent(4, &mut rng);
        let up = EncoderOutputGrad {
            z: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            alpha: rng.random_range(-1.0..1.0),
            beta: rng.random_range(-1.0..1.0),
        };
        let obj = |e: &NoiseEncoder<f64>| {
            let o = e.encode(&a).unwrap();
            o.z.iter().zip(&up.z).map(|(z, g)| z * g).sum::<f64>() + o.alpha * up.alpha + o.beta * up.beta
        };
        let mut tape = EncoderTape::default();
        enc.encode_recorded(&a, &mut tape).unwrap();
        let g = enc.backward(&tape, &up).unwrap();
        let mut p = enc.params().to_vec();
        for i in 0..p.len() {
            let fd = central_diff(&mut p, i, 1e-5, |pp| {
                let mut e = enc.clone();
                e.params_mut().copy_from_slice(pp);
                obj(&e)
            });
            assert!((g.params[i] - fd).abs() / (fd.abs() + 1e-8) < 1e-4 || (g.params[i] - fd).abs() < 1e-10);
        }
    }
}

#[test]
fn generate_does_not_touch_the_training_stream() {
    let t = trainer(4, 14);
    let a = t.generate(5, 3).unwrap();
    assert_eq!(a, t.generate(5, 3).unwrap());
    assert_ne!(a, t.generate(5, 4).unwrap());
    assert_eq!(t, trainer(4, 14));
}

#[test]
fn invalid_configs_are_listed_together() {
    let mut cfg = small_config(3, 0);
    cfg.calibration.tau = 0.5;
    cfg.lr_pqc = 0.0;
    match Trainer::new(cfg, CriticView::full(4)) {
        Err(Error::ConfigList(p)) => assert_eq!(p.len(), 3, "{p:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

//! The WGAN-GP loop: `n_critic` critic updates per batch, then one
//! generator update, each parameter group with its own Adam state.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generator::{GeneratedSample, Generator, GeneratorGradients, NoiseSource, OutputMapping, SampleTape};
use crate::config::{Ablation, TrainConfig};
use crate::critic::Critic;
use crate::data::{CriticView, ImageSet};
use crate::error::{Error, Result};
use crate::metrics::{compare_sets, intensity_stats, SetComparison};
use crate::optim::{adam_step, AdamConfig, AdamState};

/// Parameter groups, each with its own optimizer state and learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Critic,
    Encoder,
    Circuit,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 3] = [ParamGroup::Critic, ParamGroup::Encoder, ParamGroup::Circuit];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Critic => "critic",
            ParamGroup::Encoder => "encoder",
            ParamGroup::Circuit => "circuit",
        }
    }
}

/// Per-group record of optimizer updates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupUpdates {
    pub steps: u64,
    /// Base learning rate of every update so far, or NaN if two differed.
    pub base_lr: f64,
}

impl GroupUpdates {
    fn record(&mut self, base_lr: f64) {
        if self.steps == 0 {
            self.base_lr = base_lr;
        } else if self.base_lr.to_bits() != base_lr.to_bits() {
            self.base_lr = f64::NAN;
        }
        self.steps += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepCounters {
    pub critic_steps: u64,
    pub generator_steps: u64,
    pub critic: GroupUpdates,
    pub encoder: GroupUpdates,
    pub circuit: GroupUpdates,
}

impl StepCounters {
    pub fn group(&self, g: ParamGroup) -> &GroupUpdates {
        match g {
            ParamGroup::Critic => &self.critic,
            ParamGroup::Encoder => &self.encoder,
            ParamGroup::Circuit => &self.circuit,
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: u64,
    /// Mean critic estimate `E[D(real)] − E[D(fake)]` over critic steps.
    pub wasserstein: f64,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub penalty: f64,
    pub acceptance: f64,
    /// Mean brightness of the generator-step images, 0–255 scale.
    pub brightness: f64,
    pub contrast: f64,
    pub wall_seconds: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str =
        "epoch,wasserstein,critic_loss,generator_loss,penalty,acceptance,brightness,contrast,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.epoch,
            self.wasserstein,
            self.critic_loss,
            self.generator_loss,
            self.penalty,
            self.acceptance,
            self.brightness,
            self.contrast,
            self.wall_seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator<f64>,
    pub critic: Critic<f64>,
    pub adam_critic: AdamState<f64>,
    pub adam_encoder: AdamState<f64>,
    pub adam_circuit: AdamState<f64>,
    pub rng: ChaCha8Rng,
    /// Number of completed epochs.
    pub epoch: u64,
    pub counters: StepCounters,
    pub view: CriticView,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Trainer {
    /// Fresh parameters drawn from `config.seed`. `view` fixes the critic's
    /// input size.
    pub fn new(config: TrainConfig, view: CriticView) -> Result<Self> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        let side = crate::data::canvas_side(config.data_qubits)?;
        if view.canvas != side {
            return Err(Error::Shape {
                context: "critic view canvas side",
                expected: side,
                actual: view.canvas,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut generator = Generator::init(
            config.data_qubits,
            config.layers,
            config.rotations,
            &config.encoder,
            config.effective_calibration(),
            &mut rng,
        )?;
        generator.noise = match config.ablation {
            Ablation::NoiseUniform01 => NoiseSource::Uniform01,
            Ablation::NoiseGauss => NoiseSource::Gauss,
            _ => NoiseSource::Learned,
        };
        if config.ablation == Ablation::MapMax {
            generator.mapping = OutputMapping::MaxNormalize;
        }
        let critic = Critic::init(view.len(), &config.critic, &mut rng)?;
        Ok(Self {
            adam_critic: AdamState::new(critic.params().len()),
            adam_encoder: AdamState::new(generator.encoder.params().len()),
            adam_circuit: AdamState::new(generator.circuit.angles().len()),
            config,
            generator,
            critic,
            rng,
            epoch: 0,
            counters: StepCounters::default(),
            view,
        })
    }

    fn adam(&self, lr: f64) -> AdamConfig<f64> {
        AdamConfig {
            lr,
            beta1: self.config.adam_beta1,
            beta2: self.config.adam_beta2,
            eps: self.config.adam_eps,
        }
    }

    /// Learning-rate multiplier for the current epoch.
    pub fn lr_scale(&self) -> f64 {
        if self.config.lr_decay {
            1.0 - self.epoch as f64 / self.config.epochs as f64
        } else {
            1.0
        }
    }

    fn update(&mut self, group: ParamGroup, grads: &[f64]) -> Result<()> {
        let base = match group {
            ParamGroup::Critic => self.config.lr_critic,
            ParamGroup::Encoder => self.config.lr_encoder,
            ParamGroup::Circuit => self.config.lr_pqc,
        };
        let cfg = self.adam(base);
        let lr = base * self.lr_scale();
        match group {
            ParamGroup::Critic => {
                adam_step(self.critic.params_mut(), grads, &mut self.adam_critic, &cfg, lr)?;
                self.counters.critic.record(base);
            }
            ParamGroup::Encoder => {
                adam_step(self.generator.encoder.params_mut(), grads, &mut self.adam_encoder, &cfg, lr)?;
                self.counters.encoder.record(base);
            }
            ParamGroup::Circuit => {
                adam_step(self.generator.circuit.angles_mut(), grads, &mut self.adam_circuit, &cfg, lr)?;
                self.counters.circuit.record(base);
            }
        }
        Ok(())
    }

    fn diagnostic(&self, what: &str, batch: usize, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Error {
        let finite = |set: &[Vec<f64>]| set.iter().all(|v| v.iter().all(|x| x.is_finite()));
        Error::NonFinite(format!(
            "{what} at epoch {} batch {batch}; real batch finite: {}, fake batch finite: {}, \
             |critic| = {:e}, |encoder| = {:e}, |angles| = {:e}",
            self.epoch,
            finite(real),
            finite(fake),
            l2(self.critic.params()),
            l2(self.generator.encoder.params()),
            l2(self.generator.circuit.angles()),
        ))
    }

    fn fake_batch(&mut self, n: usize, batch: usize) -> Result<Vec<GeneratedSample<f64>>> {
        (0..n)
            .map(|i| {
                self.generator
                    .sample(&mut self.rng, None)
                    .map(|(_, s)| s)
                    .map_err(|e| tag_sample(e, batch, i))
            })
            .collect()
    }

    /// One pass over `train`, returning the epoch's log row.
    pub fn train_epoch(&mut self, train: &ImageSet) -> Result<EpochLog> {
        if train.is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        if train.view != self.view {
            return Err(Error::Config("training set view differs from the trainer's critic view".into()));
        }
        let start = Instant::now();
        let (mut w_sum, mut c_sum, mut p_sum, mut g_sum, mut acc_sum) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut critic_steps = 0usize;
        let mut gen_steps = 0usize;
        let mut accepted = 0usize;
        let mut shown: Vec<Vec<f64>> = Vec::new();
        let batches = train.batches(self.config.batch_size, self.config.seed, self.epoch);
        for (bi, batch) in batches.enumerate() {
            let real = batch.view(&self.view).pixels;
            let b = real.len();
            for _ in 0..self.config.n_critic {
                let fake: Vec<Vec<f64>> = self
                    .fake_batch(b, bi)?
                    .iter()
                    .map(|s| self.view.extract(&s.pixels))
                    .collect();
                let (res, grads) = self.critic.critic_loss(&real, &fake, &mut self.rng)?;
                if !res.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                    return Err(self.diagnostic("non-finite critic loss", bi, &real, &fake));
                }
                self.update(ParamGroup::Critic, &grads)?;
                self.counters.critic_steps += 1;
                critic_steps += 1;
                w_sum += res.wasserstein_estimate;
                c_sum += res.loss;
                p_sum += res.penalty;
            }

            let mut acc = GeneratorGradients::zeros_like(&self.generator);
            let mut loss = 0.0;
            let mut fakes = Vec::with_capacity(b);
            let mut tape = SampleTape::default();
            for i in 0..b {
                let (_, s) = self
                    .generator
                    .sample(&mut self.rng, Some(&mut tape))
                    .map_err(|e| tag_sample(e, bi, i))?;
                let x = self.view.extract(&s.pixels);
                let (score, grad) = self.critic.score_with_input_grad(&x)?;
                loss -= score / b as f64;
                let window: Vec<f64> = grad.iter().map(|g| -g / b as f64).collect();
                let g = self.generator.backward(&tape, &self.view.scatter(&window))?;
                acc.accumulate(&g);
                acc_sum += s.acceptance;
                accepted += 1;
                fakes.push(x);
            }
            if !loss.is_finite()
                || acc.encoder.iter().chain(&acc.angles).any(|g| !g.is_finite())
            {
                return Err(self.diagnostic("non-finite generator loss", bi, &real, &fakes));
            }
            self.update(ParamGroup::Encoder, &acc.encoder)?;
            self.update(ParamGroup::Circuit, &acc.angles)?;
            self.counters.generator_steps += 1;
            gen_steps += 1;
            g_sum += loss;
            shown.extend(fakes);
        }
        let stats = intensity_stats(&shown)?;
        let log = EpochLog {
            epoch: self.epoch,
            wasserstein: w_sum / critic_steps as f64,
            critic_loss: c_sum / critic_steps as f64,
            generator_loss: g_sum / gen_steps as f64,
            penalty: p_sum / critic_steps as f64,
            acceptance: acc_sum / accepted as f64,
            brightness: stats.brightness_summary.mean,
            contrast: stats.contrast_summary.mean,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        Ok(log)
    }

    /// `count` samples from a private RNG seeded with `seed`; the trainer's
    /// own stream is untouched.
    pub fn generate(&self, count: usize, seed: u64) -> Result<Vec<GeneratedSample<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                self.generator
                    .sample(&mut rng, None)
                    .map(|(_, s)| s)
                    .map_err(|e| tag_sample(e, 0, i))
            })
            .collect()
    }

    /// Generated images as the critic sees them.
    pub fn generate_view(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .generate(count, seed)?
            .iter()
            .map(|s| self.view.extract(&s.pixels))
            .collect())
    }

    /// Compares `reference.len()` generated images with `reference` in the
    /// critic view.
    pub fn evaluate(&self, reference: &ImageSet, seed: u64) -> Result<SetComparison> {
        let real = reference.images.view(&self.view);
        let fake = self.generate_view(real.len(), seed)?;
        compare_sets(&fake, &real.pixels, self.view.height(), self.view.width())
    }
}

fn tag_sample(e: Error, batch: usize, sample: usize) -> Error {
    match e {
        Error::DegeneratePostSelection { .. } => Error::Numerical(format!(
            "batch {batch}, sample {sample}: {e} after redrawing the latent vector"
        )),
        other => other,
    }
}

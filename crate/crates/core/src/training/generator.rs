//! The full generator: noise encoder → circuit → post-selection → pixels.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::calibration::{
    calibrate_recorded, max_normalize_recorded, CalibrationConfig, CalibrationTape, MaxNormalizeTape,
};
use crate::encoder::{sample_latent, EncoderConfig, EncoderOutputGrad, EncoderTape, LatentSample, NoiseEncoder};
use crate::error::{Error, Result};
use crate::quantum::{self, CircuitParams, QuantumTape, RotationSet};
use crate::scalar::Scalar;

/// Redraws of the latent vector allowed after a degenerate post-selection.
pub const MAX_REDRAWS: usize = 3;

/// Where the state-preparation angles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSource {
    #[default]
    Learned,
    Uniform01,
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMapping {
    #[default]
    Calibrated,
    MaxNormalize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub encoder: NoiseEncoder<T>,
    pub circuit: CircuitParams<T>,
    pub calibration: CalibrationConfig<T>,
    pub noise: NoiseSource,
    pub mapping: OutputMapping,
}

/// Inputs that fully determine one generated image.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorInput<T> {
    pub latent: LatentSample<T>,
    /// Replacement angles under a noise ablation.
    pub z_override: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample<T> {
    pub pixels: Vec<T>,
    pub z: Vec<T>,
    pub alpha: T,
    pub beta: T,
    pub acceptance: T,
}

#[derive(Debug, Clone, Default)]
pub struct SampleTape<T> {
    encoder: EncoderTape<T>,
    quantum: QuantumTape<T>,
    calibration: CalibrationTape<T>,
    max: MaxNormalizeTape<T>,
    learned_z: bool,
    recorded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGradients<T> {
    pub encoder: Vec<T>,
    pub angles: Vec<T>,
}

impl<T: Scalar> GeneratorGradients<T> {
    pub fn zeros_like(g: &Generator<T>) -> Self {
        Self {
            encoder: vec![T::zero(); g.encoder.params().len()],
            angles: vec![T::zero(); g.circuit.angles().len()],
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.encoder.iter_mut().zip(&other.encoder) {
            *a = *a + *b;
        }
        for (a, b) in self.angles.iter_mut().zip(&other.angles) {
            *a = *a + *b;
        }
    }
}

impl<T: Scalar> Generator<T> {
    /// Glorot-initialized encoder, circuit angles uniform in `[-π, π)`.
    pub fn init<R: Rng + ?Sized>(
        data_qubits: usize,
        layers: usize,
        rotations: RotationSet,
        encoder: &EncoderConfig,
        calibration: CalibrationConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = NoiseEncoder::init(data_qubits, encoder, rng)?;
        let mut circuit = CircuitParams::linear_chain(data_qubits, layers, rotations)?;
        circuit.randomize(rng);
        Ok(Self {
            encoder,
            circuit,
            calibration,
            noise: NoiseSource::Learned,
            mapping: OutputMapping::Calibrated,
        })
    }

    pub fn data_qubits(&self) -> usize {
        self.circuit.num_data_qubits()
    }

    pub fn pixels(&self) -> usize {
        1 << self.data_qubits()
    }

    pub fn draw_input<R: Rng + ?Sized>(&self, rng: &mut R) -> GeneratorInput<T> {
        let d = self.data_qubits();
        let latent = sample_latent(d, rng);
        let z_override = match self.noise {
            NoiseSource::Learned => None,
            NoiseSource::Uniform01 => Some((0..d).map(|_| T::lit(rng.random::<f64>())).collect()),
            NoiseSource::Gauss => Some((0..d).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()),
        };
        GeneratorInput { latent, z_override }
    }

    /// Runs one sample, recording into `tape` when given.
    pub fn forward(&self, input: &GeneratorInput<T>, tape: Option<&mut SampleTape<T>>) -> Result<GeneratedSample<T>> {
        let mut scratch;
        let tape = match tape {
            Some(t) => t,
            None => {
                scratch = SampleTape::default();
                &mut scratch
            }
        };
        tape.recorded = false;
        let enc = self.encoder.encode_recorded(&input.latent, &mut tape.encoder)?;
        let z = match &input.z_override {
            Some(z) => {
                if z.len() != self.data_qubits() {
                    return Err(Error::Shape {
                        context: "replacement noise vector",
                        expected: self.data_qubits(),
                        actual: z.len(),
                    });
                }
                z.clone()
            }
            None => enc.z.clone(),
        };
        tape.learned_z = input.z_override.is_none();
        let dist = quantum::forward(&z, &self.circuit, &mut tape.quantum)?;
        let pixels = match self.mapping {
            OutputMapping::Calibrated => {
                calibrate_recorded(&dist, enc.alpha, enc.beta, &self.calibration, &mut tape.calibration)?
            }
            OutputMapping::MaxNormalize => max_normalize_recorded(&dist, &mut tape.max),
        };
        tape.recorded = true;
        Ok(GeneratedSample {
            pixels: pixels.into_inner(),
            z,
            alpha: enc.alpha,
            beta: enc.beta,
            acceptance: dist.acceptance(),
        })
    }

    /// Draws inputs and runs them, redrawing up to [`MAX_REDRAWS`] times when
    /// post-selection degenerates.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut tape: Option<&mut SampleTape<T>>,
    ) -> Result<(GeneratorInput<T>, GeneratedSample<T>)> {
        let mut last = None;
        for _ in 0..=MAX_REDRAWS {
            let input = self.draw_input(rng);
            match self.forward(&input, tape.as_deref_mut()) {
                Ok(s) => return Ok((input, s)),
                Err(e @ Error::DegeneratePostSelection { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap())
    }

    pub fn backward(&self, tape: &SampleTape<T>, grad_pixels: &[T]) -> Result<GeneratorGradients<T>> {
        if !tape.recorded {
            return Err(Error::MissingTape("generator"));
        }
        let (grad_probs, grad_alpha, grad_beta) = match self.mapping {
            OutputMapping::Calibrated => {
                let g = tape.calibration.backward(grad_pixels)?;
                (g.probs, g.alpha, g.beta)
            }
            OutputMapping::MaxNormalize => (tape.max.backward(grad_pixels)?, T::zero(), T::zero()),
        };
        let q = tape.quantum.backward(&grad_probs)?;
        let grad_z = if tape.learned_z {
            q.z
        } else {
            vec![T::zero(); self.data_qubits()]
        };
        let enc = self.encoder.backward(
            &tape.encoder,
            &EncoderOutputGrad {
                z: grad_z,
                alpha: grad_alpha,
                beta: grad_beta,
            },
        )?;
        Ok(GeneratorGradients {
            encoder: enc.params,
            angles: q.angles,
        })
    }
}

//! Learnable map from latent noise to circuit angles and affine coefficients.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpTape};
use crate::scalar::{sigmoid, softplus, Scalar};

pub const DEFAULT_ALPHA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub hidden: Vec<usize>,
    pub alpha_min: f64,
    /// Keep `α > 0` through a softplus head. When false `α` is the raw head output.
    pub positive_alpha: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            alpha_min: DEFAULT_ALPHA_MIN,
            positive_alpha: true,
        }
    }
}

/// Latent vector with entries strictly inside `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample<T>(Vec<T>);

impl<T: Scalar> LatentSample<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !(v.abs() < T::one())) {
            return Err(Error::Config("latent entries must lie strictly inside (-1, 1)".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// i.i.d. `U(-1, 1)` latent draw.
pub fn sample_latent<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> LatentSample<T> {
    let values = (0..dim)
        .map(|_| loop {
            // random_range over a half-open range can return -1.0 exactly.
            let v: f64 = rng.random_range(-1.0..1.0);
            if v > -1.0 {
                break T::lit(v);
            }
        })
        .collect();
    LatentSample(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    /// State-preparation angles in `[-π, π]`.
    pub z: Vec<T>,
    pub alpha: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutputGrad<T> {
    pub z: Vec<T>,
    pub alpha: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGradients<T> {
    pub params: Vec<T>,
    pub latent: Vec<T>,
}

/// Network `D → hidden… → D+2` with tanh hidden units. Output heads:
/// `z = π·tanh(h[0..D])`, `α = softplus(h[D]) + α_min`, `β = h[D+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEncoder<T> {
    net: Mlp<T>,
    dim: usize,
    alpha_min: T,
    positive_alpha: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EncoderTape<T> {
    net: MlpTape<T>,
    raw: Vec<T>,
    out: Option<EncoderOutput<T>>,
}

impl<T: Scalar> EncoderTape<T> {
    pub fn is_recorded(&self) -> bool {
        self.out.is_some()
    }
}

impl<T: Scalar> NoiseEncoder<T> {
    fn widths(dim: usize, cfg: &EncoderConfig) -> Vec<usize> {
        let mut widths = vec![dim];
        widths.extend(&cfg.hidden);
        widths.push(dim + 2);
        widths
    }

    fn validate(dim: usize, cfg: &EncoderConfig) -> Result<()> {
        if dim == 0 {
            return Err(Error::Config("encoder input width must be >= 1".into()));
        }
        if !(cfg.alpha_min > 0.0) {
            return Err(Error::Config("alpha_min must be > 0".into()));
        }
        Ok(())
    }

    pub fn zeros(dim: usize, cfg: &EncoderConfig) -> Result<Self> {
        Self::validate(dim, cfg)?;
        Ok(Self {
            net: Mlp::zeros(&Self::widths(dim, cfg), Activation::Tanh)?,
            dim,
            alpha_min: T::lit(cfg.alpha_min),
            positive_alpha: cfg.positive_alpha,
        })
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, cfg: &EncoderConfig, rng: &mut R) -> Result<Self> {
        Self::validate(dim, cfg)?;
        Ok(Self {
            net: Mlp::glorot(&Self::widths(dim, cfg), Activation::Tanh, rng)?,
            dim,
            alpha_min: T::lit(cfg.alpha_min),
            positive_alpha: cfg.positive_alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn params(&self) -> &[T] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        self.net.params_mut()
    }

    fn heads(&self, raw: &[T]) -> EncoderOutput<T> {
        let d = self.dim;
        let z = raw[..d].iter().map(|&h| T::PI() * h.tanh()).collect();
        let alpha = if self.positive_alpha {
            softplus(raw[d]) + self.alpha_min
        } else {
            raw[d]
        };
        EncoderOutput {
            z,
            alpha,
            beta: raw[d + 1],
        }
    }

    pub fn encode(&self, a: &LatentSample<T>) -> Result<EncoderOutput<T>> {
        let raw = self.net.forward(a.as_slice())?;
        Ok(self.heads(&raw))
    }

    pub fn encode_recorded(&self, a: &LatentSample<T>, tape: &mut EncoderTape<T>) -> Result<EncoderOutput<T>> {
        tape.out = None;
        let raw = self.net.forward_recorded(a.as_slice(), &mut tape.net)?;
        let out = self.heads(&raw);
        tape.raw = raw;
        tape.out = Some(out.clone());
        Ok(out)
    }

    pub fn backward(&self, tape: &EncoderTape<T>, grad: &EncoderOutputGrad<T>) -> Result<EncoderGradients<T>> {
        let out = tape.out.as_ref().ok_or(Error::MissingTape("noise encoder"))?;
        let d = self.dim;
        if grad.z.len() != d {
            return Err(Error::Shape {
                context: "encoder z gradient",
                expected: d,
                actual: grad.z.len(),
            });
        }
        let mut grad_raw = Vec::with_capacity(d + 2);
        // d/dh π·tanh(h) = π(1 − tanh²h) = π − z²/π
        for (g, &z) in grad.z.iter().zip(&out.z) {
            grad_raw.push(*g * (T::PI() - z * z / T::PI()));
        }
        grad_raw.push(if self.positive_alpha {
            grad.alpha * sigmoid(tape.raw[d])
        } else {
            grad.alpha
        });
        grad_raw.push(grad.beta);
        let mut params = vec![T::zero(); self.net.params().len()];
        let latent = self.net.backward(&tape.net, &grad_raw, &mut params)?;
        Ok(EncoderGradients { params, latent })
    }
}

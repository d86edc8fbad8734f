//! Wasserstein critic with a gradient penalty.
//!
//! The penalty needs `∂/∂θ ‖∇ₓD(x)‖`. For a leaky-rectifier network the
//! activation derivative is piecewise constant, so with the masks
//! `mₗ = φ'(preₗ)` frozen the input gradient is the product
//! `∇ₓD = W₀ᵀ m₀ ⊙ W₁ᵀ m₁ ⊙ … ⊙ w_out`, which is linear in each weight
//! matrix. The double backward below differentiates that product directly;
//! hidden biases only move the masks and receive no penalty gradient.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpTape};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA_GP: f64 = 10.0;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub lambda_gp: f64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 64],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            lambda_gp: DEFAULT_LAMBDA_GP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    net: Mlp<T>,
    lambda_gp: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticBatchResult<T> {
    pub scores_real: Vec<T>,
    pub scores_fake: Vec<T>,
    pub penalty: T,
    /// `mean(D(real)) − mean(D(fake))`.
    pub wasserstein_estimate: T,
    /// `mean(D(fake)) − mean(D(real)) + penalty`.
    pub loss: T,
}

/// Intermediates of one input-gradient evaluation.
struct InputGradient<T> {
    masks: Vec<Vec<T>>,
    /// `aₗ = mₗ ⊙ cₗ₊₁`, the masked vector multiplied by `Wₗᵀ`.
    masked: Vec<Vec<T>>,
    grad: Vec<T>,
}

impl<T: Scalar> Critic<T> {
    fn widths(input: usize, cfg: &CriticConfig) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(&cfg.hidden);
        w.push(1);
        w
    }

    pub fn zeros(input: usize, cfg: &CriticConfig) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(&Self::widths(input, cfg), Activation::LeakyRelu(cfg.leaky_slope))?,
            lambda_gp: T::lit(cfg.lambda_gp),
        })
    }

    pub fn init<R: Rng + ?Sized>(input: usize, cfg: &CriticConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: Mlp::glorot(&Self::widths(input, cfg), Activation::LeakyRelu(cfg.leaky_slope), rng)?,
            lambda_gp: T::lit(cfg.lambda_gp),
        })
    }

    /// Wraps an existing network; its output width must be one and its
    /// hidden activation piecewise linear.
    pub fn from_network(net: Mlp<T>, lambda_gp: T) -> Result<Self> {
        if net.output_width() != 1 {
            return Err(Error::Config("critic output width must be 1".into()));
        }
        if !matches!(net.activation(), Activation::LeakyRelu(_)) {
            return Err(Error::Config("critic requires a leaky-rectifier activation".into()));
        }
        Ok(Self { net, lambda_gp })
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    pub fn lambda_gp(&self) -> T {
        self.lambda_gp
    }

    pub fn params(&self) -> &[T] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        self.net.params_mut()
    }

    pub fn score_one(&self, image: &[T]) -> Result<T> {
        Ok(self.net.forward(image)?[0])
    }

    pub fn score(&self, images: &[Vec<T>]) -> Result<Vec<T>> {
        images.iter().map(|x| self.score_one(x)).collect()
    }

    fn input_gradient(&self, x: &[T]) -> Result<(T, InputGradient<T>)> {
        let mut tape = MlpTape::default();
        let score = self.net.forward_recorded(x, &mut tape)?[0];
        let masks = tape.hidden_derivatives(self.net.activation());
        let hidden = self.net.num_layers() - 1;
        let mut c = self.net.layer(hidden).0.to_vec();
        let mut masked = vec![Vec::new(); hidden];
        for l in (0..hidden).rev() {
            let a: Vec<T> = c.iter().zip(&masks[l]).map(|(&ci, &mi)| ci * mi).collect();
            c = transpose_mul(self.net.layer(l).0, &a, self.net.widths()[l]);
            masked[l] = a;
        }
        Ok((score, InputGradient { masks, masked, grad: c }))
    }

    /// `(D(x), ∇ₓD(x))`.
    pub fn score_with_input_grad(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let (s, ig) = self.input_gradient(x)?;
        Ok((s, ig.grad))
    }

    /// Accumulates `∂/∂θ ⟨G, ∇ₓD⟩` for a fixed upstream `G`.
    fn accumulate_double_backward(&self, ig: &InputGradient<T>, upstream: &[T], grad_params: &mut [T]) {
        let hidden = self.net.num_layers() - 1;
        let mut g = upstream.to_vec();
        for l in 0..hidden {
            let (w_off, rows, cols, _) = self.net.layer_layout(l);
            let a = &ig.masked[l];
            for r in 0..rows {
                let row = &mut grad_params[w_off + r * cols..w_off + (r + 1) * cols];
                for (gp, &gc) in row.iter_mut().zip(&g) {
                    *gp = *gp + a[r] * gc;
                }
            }
            let w = self.net.layer(l).0;
            g = (0..rows)
                .map(|r| {
                    let dot = w[r * cols..(r + 1) * cols]
                        .iter()
                        .zip(&g)
                        .fold(T::zero(), |acc, (&wv, &gv)| acc + wv * gv);
                    dot * ig.masks[l][r]
                })
                .collect();
        }
        let (w_off, _, cols, _) = self.net.layer_layout(hidden);
        for (gp, &gv) in grad_params[w_off..w_off + cols].iter_mut().zip(&g) {
            *gp = *gp + gv;
        }
    }

    fn check_batches(&self, real: &[Vec<T>], fake: &[Vec<T>]) -> Result<()> {
        if real.len() != fake.len() || real.is_empty() {
            return Err(Error::Shape {
                context: "critic real/fake batch sizes",
                expected: real.len(),
                actual: fake.len(),
            });
        }
        for x in real.iter().chain(fake) {
            if x.len() != self.input_width() {
                return Err(Error::Shape {
                    context: "critic image width",
                    expected: self.input_width(),
                    actual: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Interpolates `x̂ = ε·real + (1−ε)·fake` with one `ε ~ U(0,1)` per pair.
    pub fn interpolate<R: Rng + ?Sized>(real: &[Vec<T>], fake: &[Vec<T>], rng: &mut R) -> Vec<Vec<T>> {
        real.iter()
            .zip(fake)
            .map(|(r, f)| {
                let eps = T::lit(rng.random::<f64>());
                r.iter().zip(f).map(|(&a, &b)| eps * a + (T::one() - eps) * b).collect()
            })
            .collect()
    }

    /// Penalty `λ·mean((‖∇D(x̂)‖ − 1)²)` on explicit interpolates, optionally
    /// accumulating its parameter gradient.
    pub fn penalty_at(&self, points: &[Vec<T>], mut grad_params: Option<&mut [T]>) -> Result<T> {
        let b = T::from_usize_lossy(points.len());
        let mut total = T::zero();
        for x in points {
            let (_, ig) = self.input_gradient(x)?;
            let norm = ig.grad.iter().map(|&g| g * g).sum::<T>().sqrt();
            let gap = norm - T::one();
            total = total + gap * gap;
            if let Some(gp) = grad_params.as_deref_mut() {
                if norm > T::zero() {
                    let scale = self.lambda_gp * T::lit(2.0) * gap / (norm * b);
                    let upstream: Vec<T> = ig.grad.iter().map(|&g| g * scale).collect();
                    self.accumulate_double_backward(&ig, &upstream, gp);
                }
            }
        }
        Ok(self.lambda_gp * total / b)
    }

    pub fn gradient_penalty<R: Rng + ?Sized>(&self, real: &[Vec<T>], fake: &[Vec<T>], rng: &mut R) -> Result<T> {
        self.check_batches(real, fake)?;
        let points = Self::interpolate(real, fake, rng);
        self.penalty_at(&points, None)
    }

    /// WGAN-GP critic objective and its parameter gradient.
    pub fn critic_loss<R: Rng + ?Sized>(
        &self,
        real: &[Vec<T>],
        fake: &[Vec<T>],
        rng: &mut R,
    ) -> Result<(CriticBatchResult<T>, Vec<T>)> {
        self.check_batches(real, fake)?;
        let points = Self::interpolate(real, fake, rng);
        self.critic_loss_at(real, fake, &points)
    }

    /// As [`Critic::critic_loss`] with the interpolates supplied.
    pub fn critic_loss_at(
        &self,
        real: &[Vec<T>],
        fake: &[Vec<T>],
        points: &[Vec<T>],
    ) -> Result<(CriticBatchResult<T>, Vec<T>)> {
        self.check_batches(real, fake)?;
        let b = T::from_usize_lossy(real.len());
        let mut grads = vec![T::zero(); self.net.params().len()];
        let mut tape = MlpTape::default();
        let mut scores_real = Vec::with_capacity(real.len());
        let mut scores_fake = Vec::with_capacity(fake.len());
        for x in real {
            scores_real.push(self.net.forward_recorded(x, &mut tape)?[0]);
            self.net.backward(&tape, &[-T::one() / b], &mut grads)?;
        }
        for x in fake {
            scores_fake.push(self.net.forward_recorded(x, &mut tape)?[0]);
            self.net.backward(&tape, &[T::one() / b], &mut grads)?;
        }
        let penalty = self.penalty_at(points, Some(&mut grads))?;
        let mean_real = scores_real.iter().copied().sum::<T>() / b;
        let mean_fake = scores_fake.iter().copied().sum::<T>() / b;
        let result = CriticBatchResult {
            wasserstein_estimate: mean_real - mean_fake,
            loss: mean_fake - mean_real + penalty,
            scores_real,
            scores_fake,
            penalty,
        };
        Ok((result, grads))
    }
}

/// `Wᵀ·a` for row-major `W` with `cols` columns.
fn transpose_mul<T: Scalar>(w: &[T], a: &[T], cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for (r, &ar) in a.iter().enumerate() {
        if ar == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o = *o + ar * wv;
        }
    }
    out
}

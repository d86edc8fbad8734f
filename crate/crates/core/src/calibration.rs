//! Differentiable map from a conditional distribution to pixel intensities.
//!
//! Four stages, each individually switchable:
//!
//! 1. smoothing: `p̃ = (p + ε_p)^{1/τ} / Σ (p + ε_p)^{1/τ}`
//! 2. deviation: `u = N·p̃ − 1`, `x = softplus(k·u) − ln 2`
//! 3. normalization: `x̄ = (x − μ) / (σ + ε_n)` with population `σ`
//! 4. affine: `v = α·x̄ + β`
//!
//! followed by the sigmoid projection `y = σ(v)`, which is always applied.
//! A disabled stage forwards its input unchanged; with affine disabled
//! `α = 1, β = 0`.

use crate::error::{Error, Result};
use crate::quantum::ConditionalDistribution;
use crate::scalar::{mean, pop_std, sigmoid, softplus, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Smoothing,
    Deviation,
    Normalization,
    Affine,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Smoothing, Stage::Deviation, Stage::Normalization, Stage::Affine];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Smoothing => "smoothing",
            Stage::Deviation => "deviation",
            Stage::Normalization => "normalization",
            Stage::Affine => "affine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageFlags {
    pub smoothing: bool,
    pub deviation: bool,
    pub normalization: bool,
    pub affine: bool,
}

impl StageFlags {
    pub const ALL_ON: Self = Self {
        smoothing: true,
        deviation: true,
        normalization: true,
        affine: true,
    };
    pub const ALL_OFF: Self = Self {
        smoothing: false,
        deviation: false,
        normalization: false,
        affine: false,
    };

    pub fn without(mut self, stage: Stage) -> Self {
        *self.flag_mut(stage) = false;
        self
    }

    pub fn get(&self, stage: Stage) -> bool {
        match stage {
            Stage::Smoothing => self.smoothing,
            Stage::Deviation => self.deviation,
            Stage::Normalization => self.normalization,
            Stage::Affine => self.affine,
        }
    }

    pub fn flag_mut(&mut self, stage: Stage) -> &mut bool {
        match stage {
            Stage::Smoothing => &mut self.smoothing,
            Stage::Deviation => &mut self.deviation,
            Stage::Normalization => &mut self.normalization,
            Stage::Affine => &mut self.affine,
        }
    }
}

impl Default for StageFlags {
    fn default() -> Self {
        Self::ALL_ON
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig<T> {
    pub tau: T,
    pub k: T,
    pub eps_p: T,
    pub eps_n: T,
    pub stages: StageFlags,
}

impl<T: Scalar> Default for CalibrationConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(2.0),
            k: T::lit(5.0),
            eps_p: T::lit(1e-8),
            eps_n: T::lit(1e-6),
            stages: StageFlags::ALL_ON,
        }
    }
}

impl<T: Scalar> CalibrationConfig<T> {
    /// Every violated constraint, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.stages.smoothing && !(self.tau > T::one()) {
            out.push(format!("calibration.tau must be > 1 when smoothing is enabled (got {})", self.tau));
        }
        if !(self.k > T::zero()) {
            out.push(format!("calibration.k must be > 0 (got {})", self.k));
        }
        if !(self.eps_p > T::zero()) {
            out.push(format!("calibration.eps_p must be > 0 (got {})", self.eps_p));
        }
        if !(self.eps_n > T::zero()) {
            out.push(format!("calibration.eps_n must be > 0 (got {})", self.eps_n));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }
}

/// Pixel intensities strictly inside `(0, 1)`, or `[0, 1]` for the max baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelVector<T>(pub Vec<T>);

impl<T> PixelVector<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

pub fn smooth<T: Scalar>(p: &[T], tau: T, eps_p: T) -> Result<Vec<T>> {
    if !(tau > T::one()) {
        return Err(Error::Config(format!("smoothing temperature must be > 1 (got {tau})")));
    }
    let inv_tau = T::one() / tau;
    let w: Vec<T> = p.iter().map(|&pi| (pi + eps_p).powf(inv_tau)).collect();
    let total: T = w.iter().copied().sum();
    Ok(w.into_iter().map(|wi| wi / total).collect())
}

pub fn deviation_map<T: Scalar>(p: &[T], k: T) -> Vec<T> {
    let n = T::from_usize_lossy(p.len());
    let base = T::LN_2();
    p.iter().map(|&pi| softplus(k * (n * pi - T::one())) - base).collect()
}

pub fn contrast_normalize<T: Scalar>(x: &[T], eps_n: T) -> Vec<T> {
    let mu = mean(x);
    let sigma = pop_std(x, mu);
    let denom = sigma + eps_n;
    x.iter().map(|&xi| (xi - mu) / denom).collect()
}

/// `σ(α·x̄ + β)`, clamped to `[ε, 1 − ε]` (machine epsilon) so that
/// saturated pixels stay strictly inside the unit interval.
pub fn affine_project<T: Scalar>(xbar: &[T], alpha: T, beta: T) -> PixelVector<T> {
    let eps = T::epsilon();
    let hi = T::one() - eps;
    PixelVector(xbar.iter().map(|&x| sigmoid(alpha * x + beta).max(eps).min(hi)).collect())
}

/// `p / max(p)`: the uncalibrated baseline mapping.
pub fn max_normalize<T: Scalar>(dist: &ConditionalDistribution<T>) -> PixelVector<T> {
    let max = dist.probs().iter().copied().fold(T::zero(), T::max);
    PixelVector(dist.probs().iter().map(|&p| p / max).collect())
}

/// Everything [`CalibrationTape::backward`] needs.
#[derive(Debug, Clone)]
struct Recorded<T> {
    cfg: CalibrationConfig<T>,
    p: Vec<T>,
    /// Unnormalized smoothing weights and their sum.
    w: Vec<T>,
    w_sum: T,
    p_smooth: Vec<T>,
    x: Vec<T>,
    mu: T,
    sigma: T,
    xbar: Vec<T>,
    alpha: T,
    out: Vec<T>,
}

#[derive(Debug, Clone, Default)]
pub struct CalibrationTape<T> {
    recorded: Option<Recorded<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGradients<T> {
    pub probs: Vec<T>,
    pub alpha: T,
    pub beta: T,
}

/// Full cascade without recording.
pub fn calibrate<T: Scalar>(
    dist: &ConditionalDistribution<T>,
    alpha: T,
    beta: T,
    cfg: &CalibrationConfig<T>,
) -> Result<PixelVector<T>> {
    calibrate_recorded(dist, alpha, beta, cfg, &mut CalibrationTape::default())
}

pub fn calibrate_recorded<T: Scalar>(
    dist: &ConditionalDistribution<T>,
    alpha: T,
    beta: T,
    cfg: &CalibrationConfig<T>,
    tape: &mut CalibrationTape<T>,
) -> Result<PixelVector<T>> {
    tape.recorded = None;
    cfg.validate()?;
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Config("affine coefficients must be finite".into()));
    }
    let st = cfg.stages;
    let p = dist.probs().to_vec();

    let (w, w_sum, p_smooth) = if st.smoothing {
        let inv_tau = T::one() / cfg.tau;
        let w: Vec<T> = p.iter().map(|&pi| (pi + cfg.eps_p).powf(inv_tau)).collect();
        let w_sum: T = w.iter().copied().sum();
        let ps = w.iter().map(|&wi| wi / w_sum).collect();
        (w, w_sum, ps)
    } else {
        (Vec::new(), T::one(), p.clone())
    };

    let x = if st.deviation {
        deviation_map(&p_smooth, cfg.k)
    } else {
        p_smooth.clone()
    };

    let (mu, sigma, xbar) = if st.normalization {
        let mu = mean(&x);
        let sigma = pop_std(&x, mu);
        let denom = sigma + cfg.eps_n;
        (mu, sigma, x.iter().map(|&xi| (xi - mu) / denom).collect())
    } else {
        (T::zero(), T::zero(), x.clone())
    };

    let (alpha, beta) = if st.affine { (alpha, beta) } else { (T::one(), T::zero()) };
    let out = affine_project(&xbar, alpha, beta).into_inner();

    tape.recorded = Some(Recorded {
        cfg: *cfg,
        p,
        w,
        w_sum,
        p_smooth,
        x,
        mu,
        sigma,
        xbar,
        alpha,
        out: out.clone(),
    });
    Ok(PixelVector(out))
}

impl<T: Scalar> CalibrationTape<T> {
    pub fn is_recorded(&self) -> bool {
        self.recorded.is_some()
    }

    pub fn backward(&self, grad_pixels: &[T]) -> Result<CalibrationGradients<T>> {
        let r = self.recorded.as_ref().ok_or(Error::MissingTape("calibration"))?;
        let n = r.p.len();
        if grad_pixels.len() != n {
            return Err(Error::Shape {
                context: "calibration upstream gradient",
                expected: n,
                actual: grad_pixels.len(),
            });
        }
        let st = r.cfg.stages;

        let grad_v: Vec<T> = grad_pixels
            .iter()
            .zip(&r.out)
            .map(|(&g, &y)| g * y * (T::one() - y))
            .collect();
        let (grad_alpha, grad_beta) = if st.affine {
            (
                grad_v.iter().zip(&r.xbar).map(|(&g, &x)| g * x).sum(),
                grad_v.iter().copied().sum(),
            )
        } else {
            (T::zero(), T::zero())
        };
        let grad_xbar: Vec<T> = grad_v.iter().map(|&g| g * r.alpha).collect();

        let grad_x = if st.normalization {
            let nn = T::from_usize_lossy(n);
            let s = r.sigma + r.cfg.eps_n;
            let mean_g = mean(&grad_xbar);
            let proj: T = grad_xbar.iter().zip(&r.x).map(|(&g, &xi)| g * (xi - r.mu)).sum();
            // ∂σ/∂x_i = (x_i − μ)/(Nσ); zero at σ = 0 where the numerator vanishes too.
            let coef = if r.sigma > T::zero() {
                proj / (nn * r.sigma * s * s)
            } else {
                T::zero()
            };
            grad_xbar
                .iter()
                .zip(&r.x)
                .map(|(&g, &xi)| (g - mean_g) / s - coef * (xi - r.mu))
                .collect()
        } else {
            grad_xbar
        };

        let grad_ps: Vec<T> = if st.deviation {
            let nn = T::from_usize_lossy(n);
            grad_x
                .iter()
                .zip(&r.p_smooth)
                .map(|(&g, &ps)| g * sigmoid(r.cfg.k * (nn * ps - T::one())) * r.cfg.k * nn)
                .collect()
        } else {
            grad_x
        };

        let grad_p = if st.smoothing {
            let dot: T = grad_ps.iter().zip(&r.p_smooth).map(|(&g, &ps)| g * ps).sum();
            let inv_tau = T::one() / r.cfg.tau;
            grad_ps
                .iter()
                .zip(&r.w)
                .zip(&r.p)
                .map(|((&g, &wi), &pi)| (g - dot) / r.w_sum * inv_tau * wi / (pi + r.cfg.eps_p))
                .collect()
        } else {
            grad_ps
        };

        Ok(CalibrationGradients {
            probs: grad_p,
            alpha: grad_alpha,
            beta: grad_beta,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MaxNormalizeTape<T> {
    recorded: Option<(Vec<T>, usize)>,
}

pub fn max_normalize_recorded<T: Scalar>(
    dist: &ConditionalDistribution<T>,
    tape: &mut MaxNormalizeTape<T>,
) -> PixelVector<T> {
    let probs = dist.probs();
    let arg = probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
    tape.recorded = Some((probs.to_vec(), arg));
    max_normalize(dist)
}

impl<T: Scalar> MaxNormalizeTape<T> {
    /// Gradient w.r.t. the probabilities, treating the (first) argmax as fixed.
    pub fn backward(&self, grad_pixels: &[T]) -> Result<Vec<T>> {
        let (p, arg) = self.recorded.as_ref().ok_or(Error::MissingTape("max normalization"))?;
        if grad_pixels.len() != p.len() {
            return Err(Error::Shape {
                context: "max-normalize upstream gradient",
                expected: p.len(),
                actual: grad_pixels.len(),
            });
        }
        let m = p[*arg];
        let mut g: Vec<T> = grad_pixels.iter().map(|&gi| gi / m).collect();
        let cross: T = grad_pixels.iter().zip(p).map(|(&gi, &pi)| gi * pi).sum();
        g[*arg] = g[*arg] - cross / (m * m);
        Ok(g)
    }
}

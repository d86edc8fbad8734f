//! Small fully connected networks with hand-written reverse passes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Tanh,
    LeakyRelu(f64),
}

impl Activation {
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu(slope) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::lit(slope)
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::LeakyRelu(slope) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::lit(slope)
                }
            }
        }
    }
}

/// Multilayer perceptron with a shared hidden activation and a linear output.
///
/// All weights and biases live in one flat buffer so a single optimizer
/// state can cover the whole network. Layer `l` stores its weight matrix
/// row-major (`out × in`) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<T>,
    offsets: Vec<usize>,
}

/// Per-layer values kept for the reverse pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTape<T> {
    /// `inputs[l]` feeds layer `l`; the last entry is the network output.
    activations: Vec<Vec<T>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> MlpTape<T> {
    pub fn is_recorded(&self) -> bool {
        !self.activations.is_empty()
    }

    pub fn output(&self) -> Option<&[T]> {
        self.activations.last().map(Vec::as_slice)
    }

    pub fn input(&self) -> Option<&[T]> {
        self.activations.first().map(Vec::as_slice)
    }

    /// Derivative masks `φ'(pre)` for each hidden layer.
    pub(crate) fn hidden_derivatives(&self, activation: Activation) -> Vec<Vec<T>> {
        self.pre
            .iter()
            .zip(&self.activations[1..])
            .map(|(pre, post)| {
                pre.iter()
                    .zip(post)
                    .map(|(&x, &y)| activation.derivative(x, y))
                    .collect()
            })
            .collect()
    }
}

impl<T: Scalar> Mlp<T> {
    /// All-zero network with the given layer widths (input first, output last).
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("invalid network widths {widths:?}")));
        }
        let mut offsets = Vec::with_capacity(widths.len());
        let mut total = 0;
        for pair in widths.windows(2) {
            offsets.push(total);
            total += pair[0] * pair[1] + pair[1];
        }
        offsets.push(total);
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            params: vec![T::zero(); total],
            offsets,
        })
    }

    /// Weights uniform in `±√(6/(fan_in+fan_out))`, biases zero.
    pub fn glorot<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.widths[l], net.widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = net.layer_mut(l);
            for v in w {
                *v = T::lit(rng.random_range(-limit..=limit));
            }
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// `(offset, rows, cols)` of layer `l`'s weight matrix and its bias offset.
    pub fn layer_layout(&self, l: usize) -> (usize, usize, usize, usize) {
        let (cols, rows) = (self.widths[l], self.widths[l + 1]);
        let w = self.offsets[l];
        (w, rows, cols, w + rows * cols)
    }

    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (w, rows, cols, b) = self.layer_layout(l);
        (&self.params[w..w + rows * cols], &self.params[b..b + rows])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        let (w, rows, cols, _) = self.layer_layout(l);
        let (weights, rest) = self.params[w..].split_at_mut(rows * cols);
        (weights, &mut rest[..rows])
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_width(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in 0..self.num_layers() {
            let mut next = affine(self.layer(l), &h);
            if l + 1 < self.num_layers() {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            h = next;
        }
        Ok(h)
    }

    pub fn forward_recorded(&self, x: &[T], tape: &mut MlpTape<T>) -> Result<Vec<T>> {
        tape.activations.clear();
        tape.pre.clear();
        self.check_input(x)?;
        tape.activations.push(x.to_vec());
        for l in 0..self.num_layers() {
            let pre = affine(self.layer(l), tape.activations.last().unwrap());
            if l + 1 < self.num_layers() {
                let post = pre.iter().map(|&v| self.activation.apply(v)).collect();
                tape.pre.push(pre);
                tape.activations.push(post);
            } else {
                tape.activations.push(pre);
            }
        }
        Ok(tape.activations.last().unwrap().clone())
    }

    /// Accumulates `∂loss/∂params` into `grad_params` and returns `∂loss/∂input`.
    pub fn backward(&self, tape: &MlpTape<T>, grad_out: &[T], grad_params: &mut [T]) -> Result<Vec<T>> {
        if !tape.is_recorded() {
            return Err(Error::MissingTape("dense network"));
        }
        if grad_out.len() != self.output_width() {
            return Err(Error::Shape {
                context: "network upstream gradient",
                expected: self.output_width(),
                actual: grad_out.len(),
            });
        }
        if grad_params.len() != self.params.len() {
            return Err(Error::Shape {
                context: "network gradient buffer",
                expected: self.params.len(),
                actual: grad_params.len(),
            });
        }
        let mut delta = grad_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            if l + 1 < self.num_layers() {
                let pre = &tape.pre[l];
                let post = &tape.activations[l + 1];
                for ((d, &x), &y) in delta.iter_mut().zip(pre).zip(post) {
                    *d = *d * self.activation.derivative(x, y);
                }
            }
            let input = &tape.activations[l];
            let (w_off, rows, cols, b_off) = self.layer_layout(l);
            for r in 0..rows {
                let d = delta[r];
                grad_params[b_off + r] = grad_params[b_off + r] + d;
                let row = &mut grad_params[w_off + r * cols..w_off + (r + 1) * cols];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g = *g + d * xi;
                }
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![T::zero(); cols];
            for r in 0..rows {
                let d = delta[r];
                for (p, &wv) in prev.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                    *p = *p + d * wv;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }
}

/// `W·x + b` for a row-major `W`.
pub(crate) fn affine<T: Scalar>((w, b): (&[T], &[T]), x: &[T]) -> Vec<T> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .fold(bias, |acc, (&wv, &xv)| acc + wv * xv)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_covers_every_parameter_once() {
        let net = Mlp::<f64>::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        assert_eq!(net.params().len(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(net.layer_layout(1), (16, 2, 4, 24));
    }

    #[test]
    fn glorot_respects_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::glorot(&[8, 32, 10], Activation::Tanh, &mut rng).unwrap();
        let limit = (6.0 / 40.0_f64).sqrt();
        let (w, b) = net.layer(0);
        assert!(w.iter().all(|v| v.abs() <= limit));
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for act in [Activation::Tanh, Activation::LeakyRelu(0.2)] {
            let mut net = Mlp::<f64>::glorot(&[3, 5, 4, 2], act, &mut rng).unwrap();
            for p in net.params_mut() {
                *p += rng.random_range(-0.3..0.3);
            }
            let x = [0.3, -0.7, 0.1];
            let up = [0.8, -1.1];
            let loss = |n: &Mlp<f64>, x: &[f64]| {
                let y = n.forward(x).unwrap();
                y[0] * up[0] + y[1] * up[1]
            };
            let mut tape = MlpTape::default();
            net.forward_recorded(&x, &mut tape).unwrap();
            let mut g = vec![0.0; net.params().len()];
            let gx = net.backward(&tape, &up, &mut g).unwrap();
            let h = 1e-6;
            for i in 0..g.len() {
                let mut plus = net.clone();
                plus.params_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[i] -= h;
                let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
            }
            for i in 0..3 {
                let mut xp = x;
                xp[i] += h;
                let mut xm = x;
                xm[i] -= h;
                let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
                assert!((fd - gx[i]).abs() < 1e-7 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn backward_without_forward_errors() {
        let net = Mlp::<f64>::zeros(&[2, 2], Activation::Tanh).unwrap();
        let mut g = vec![0.0; net.params().len()];
        assert!(matches!(
            net.backward(&MlpTape::default(), &[1.0, 1.0], &mut g),
            Err(Error::MissingTape(_))
        ));
    }
}

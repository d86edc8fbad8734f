//! Fréchet distance between Gaussian fits of two feature sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ridge added to both covariances before the matrix square root.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// Sample mean and unbiased covariance of row vectors.
pub fn gaussian_fit<T: Scalar>(samples: &[Vec<T>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if samples.len() < 2 {
        return Err(Error::Config("a Gaussian fit needs at least two samples".into()));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Config("feature vectors differ in dimension".into()));
    }
    let n = samples.len();
    let data = DMatrix::from_fn(n, dim, |r, c| samples[r][c].to_f64_lossy());
    let mu = DVector::from_fn(dim, |c, _| data.column(c).sum() / n as f64);
    let mut centered = data;
    for c in 0..dim {
        let m = mu[c];
        centered.column_mut(c).iter_mut().for_each(|v| *v -= m);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((mu, cov))
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`, with the trace of the square
/// root taken from the eigenvalues of the symmetric `Σ₁^{1/2} Σ₂ Σ₁^{1/2}`.
pub fn frechet_from_moments(
    mu1: &DVector<f64>,
    s1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64> {
    if mu1.len() != mu2.len() || s1.shape() != s2.shape() || s1.nrows() != mu1.len() {
        return Err(Error::Config("Gaussian moments have mismatched dimensions".into()));
    }
    let root1 = sym_sqrt(s1);
    let inner = &root1 * s2 * &root1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let diff = mu1 - mu2;
    let d = diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Numerical("matrix square root produced a non-finite trace".into()))
    }
}

/// Fréchet distance between Gaussian fits of `x` and `y`, with
/// [`COVARIANCE_RIDGE`] added to both covariances. A failed square root is
/// retried once with a 100× larger ridge.
pub fn frechet_gaussian<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<T> {
    let (mu1, s1) = gaussian_fit(x)?;
    let (mu2, s2) = gaussian_fit(y)?;
    if mu1.len() != mu2.len() {
        return Err(Error::Config("feature sets differ in dimension".into()));
    }
    let dim = mu1.len();
    let mut last = None;
    for ridge in [COVARIANCE_RIDGE, COVARIANCE_RIDGE * 100.0] {
        let eye = DMatrix::<f64>::identity(dim, dim) * ridge;
        match frechet_from_moments(&mu1, &(&s1 + &eye), &mu2, &(&s2 + &eye)) {
            Ok(d) => return Ok(T::lit(d)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

//! Unbiased squared MMD with a polynomial kernel.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `k(a, b) = (scale·⟨a, b⟩ + coef)^degree`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyKernel<T> {
    pub degree: i32,
    pub coef: T,
    pub scale: T,
}

impl<T: Scalar> PolyKernel<T> {
    /// Degree 3, offset 1, scale `1/dim`.
    pub fn kid(dim: usize) -> Self {
        Self {
            degree: 3,
            coef: T::one(),
            scale: T::one() / T::from_usize_lossy(dim),
        }
    }

    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        let dot = a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        (self.scale * dot + self.coef).powi(self.degree)
    }
}

fn check_sets<T>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<usize> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Config(format!(
            "MMD needs at least two samples per set (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if x.iter().chain(y).any(|v| v.len() != dim) {
        return Err(Error::Config("MMD feature vectors differ in dimension".into()));
    }
    Ok(dim)
}

/// Mean kernel value over distinct pairs within one set.
fn within<T: Scalar>(k: &PolyKernel<T>, s: &[Vec<T>]) -> T {
    let mut total = T::zero();
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            total = total + k.eval(&s[i], &s[j]);
        }
    }
    let n = T::from_usize_lossy(s.len());
    // Each unordered pair stands for two ordered ones.
    total * T::lit(2.0) / (n * (n - T::one()))
}

pub fn mmd_poly_with<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>], kernel: &PolyKernel<T>) -> Result<T> {
    check_sets(x, y)?;
    let mut cross = T::zero();
    for a in x {
        for b in y {
            cross = cross + kernel.eval(a, b);
        }
    }
    let cross = cross / T::from_usize_lossy(x.len() * y.len());
    Ok(within(kernel, x) + within(kernel, y) - T::lit(2.0) * cross)
}

/// Unbiased MMD² with the standard KID kernel (degree 3, coef 1, scale 1/dim).
pub fn mmd_poly<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<T> {
    let dim = check_sets(x, y)?;
    mmd_poly_with(x, y, &PolyKernel::kid(dim))
}

/// MMD values after `rounds` random re-splits of the pooled samples into
/// groups of the original sizes.
pub fn permutation_null<T: Scalar, R: Rng + ?Sized>(
    x: &[Vec<T>],
    y: &[Vec<T>],
    rounds: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let dim = check_sets(x, y)?;
    let kernel = PolyKernel::kid(dim);
    let mut pooled: Vec<&Vec<T>> = x.iter().chain(y).collect();
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        pooled.shuffle(rng);
        let a: Vec<Vec<T>> = pooled[..x.len()].iter().map(|v| (*v).clone()).collect();
        let b: Vec<Vec<T>> = pooled[x.len()..].iter().map(|v| (*v).clone()).collect();
        out.push(mmd_poly_with(&a, &b, &kernel)?);
    }
    Ok(out)
}

/// The `q`-quantile of `|MMD|` under the permutation null: values below it
/// are indistinguishable from resampling noise.
pub fn permutation_noise_floor<T: Scalar, R: Rng + ?Sized>(
    x: &[Vec<T>],
    y: &[Vec<T>],
    rounds: usize,
    q: f64,
    rng: &mut R,
) -> Result<T> {
    let mut null: Vec<T> = permutation_null(x, y, rounds, rng)?.into_iter().map(|v| v.abs()).collect();
    null.sort_by(|a, b| a.partial_cmp(b).expect("finite MMD"));
    let idx = ((null.len() as f64 - 1.0) * q).round() as usize;
    Ok(null[idx.min(null.len() - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_single_point_cancels() {
        let x = vec![vec![0.3_f64, -0.2]; 4];
        assert!(mmd_poly(&x, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn point_masses_at_origin_and_unit_vector() {
        let k = PolyKernel {
            degree: 3,
            coef: 1.0,
            scale: 1.0,
        };
        let x = vec![vec![0.0_f64, 0.0]; 3];
        let y = vec![vec![1.0_f64, 0.0]; 3];
        assert!((mmd_poly_with(&x, &y, &k).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_sets_rejected() {
        assert!(mmd_poly(&[vec![1.0_f64]], &[vec![1.0], vec![2.0]]).is_err());
    }
}

//! Deterministic pixel features standing in for a learned embedding.

use crate::error::{Error, Result};
use crate::scalar::{mean, pop_std, Scalar};

pub const POOL: usize = 4;

/// `POOL × POOL` average pooling followed by the global mean and standard
/// deviation: 18 values for 16×16 images, 51 for 28×28.
pub fn feature_vector<T: Scalar>(image: &[T], height: usize, width: usize) -> Result<Vec<T>> {
    if image.len() != height * width || height % POOL != 0 || width % POOL != 0 {
        return Err(Error::Config(format!(
            "feature map needs an image whose sides are multiples of {POOL} (got {height}x{width}, {} pixels)",
            image.len()
        )));
    }
    let (gh, gw) = (height / POOL, width / POOL);
    let cell = T::from_usize_lossy(POOL * POOL);
    let mut out = Vec::with_capacity(gh * gw + 2);
    for by in 0..gh {
        for bx in 0..gw {
            let mut acc = T::zero();
            for y in by * POOL..(by + 1) * POOL {
                for x in bx * POOL..(bx + 1) * POOL {
                    acc = acc + image[y * width + x];
                }
            }
            out.push(acc / cell);
        }
    }
    let m = mean(image);
    out.push(m);
    out.push(pop_std(image, m));
    Ok(out)
}

pub fn feature_map<T: Scalar>(images: &[Vec<T>], height: usize, width: usize) -> Result<Vec<Vec<T>>> {
    images.iter().map(|img| feature_vector(img, height, width)).collect()
}

pub fn feature_dim(height: usize, width: usize) -> usize {
    (height / POOL) * (width / POOL) + 2
}

//! Evaluation: intensity statistics, kernel and Fréchet distances on pixel
//! features, and image export.

mod export;
mod features;
mod frechet;
mod intensity;
mod mmd;

pub use export::{export_images, montage, read_pgm, to_byte, GrayImage, ImageFormat};
pub use features::{feature_dim, feature_map, feature_vector, POOL};
pub use frechet::{frechet_from_moments, frechet_gaussian, gaussian_fit, COVARIANCE_RIDGE};
pub use intensity::{intensity_stats, IntensityStats, MeanStd};
pub use mmd::{mmd_poly, mmd_poly_with, permutation_noise_floor, permutation_null, PolyKernel};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    MmdPoly,
    FrechetGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionDistance {
    pub value: f64,
    pub kind: DistanceKind,
}

/// Pixel-feature distances and intensity statistics of a generated set
/// against a reference set, both given at the same resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SetComparison {
    pub pixel_mmd: f64,
    pub pixel_frechet: f64,
    pub stats: IntensityStats<f64>,
}

pub fn compare_sets(generated: &[Vec<f64>], reference: &[Vec<f64>], height: usize, width: usize) -> Result<SetComparison> {
    let fg = feature_map(generated, height, width)?;
    let fr = feature_map(reference, height, width)?;
    Ok(SetComparison {
        pixel_mmd: mmd_poly(&fg, &fr)?,
        pixel_frechet: frechet_gaussian(&fg, &fr)?,
        stats: intensity_stats(generated)?,
    })
}

use crate::error::{Error, Result};
use crate::scalar::{mean, pop_std, Scalar};

/// Mean and standard deviation of a per-image statistic across a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> MeanStd<T> {
    pub fn of(values: &[T]) -> Self {
        let m = mean(values);
        Self {
            mean: m,
            std: pop_std(values, m),
        }
    }
}

/// Brightness (mean pixel) and RMS contrast (pixel standard deviation), both
/// on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityStats<T> {
    pub brightness: Vec<T>,
    pub contrast: Vec<T>,
    pub brightness_summary: MeanStd<T>,
    pub contrast_summary: MeanStd<T>,
}

pub fn intensity_stats<T: Scalar>(images: &[Vec<T>]) -> Result<IntensityStats<T>> {
    if images.is_empty() || images.iter().any(Vec::is_empty) {
        return Err(Error::Config("intensity statistics need a non-empty batch of non-empty images".into()));
    }
    let scale = T::lit(255.0);
    let mut brightness = Vec::with_capacity(images.len());
    let mut contrast = Vec::with_capacity(images.len());
    for img in images {
        let m = mean(img);
        brightness.push(m * scale);
        contrast.push(pop_std(img, m) * scale);
    }
    Ok(IntensityStats {
        brightness_summary: MeanStd::of(&brightness),
        contrast_summary: MeanStd::of(&contrast),
        brightness,
        contrast,
    })
}

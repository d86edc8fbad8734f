use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::idx::{load_idx, RawDataset};
use super::resize::{area_resample, CenteredRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizePolicy {
    /// Area-average resample to the `2^(D/2)` canvas.
    DownsamplePow2,
    /// Center on the canvas (zero border), or center-crop if the canvas is smaller.
    #[default]
    PadCrop,
}

impl ResizePolicy {
    pub fn name(self) -> &'static str {
        match self {
            ResizePolicy::DownsamplePow2 => "downsample_pow2",
            ResizePolicy::PadCrop => "pad_crop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "downsample_pow2" => Some(ResizePolicy::DownsamplePow2),
            "pad_crop" => Some(ResizePolicy::PadCrop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Keep only this label; `None` keeps every class.
    pub class: Option<u8>,
    pub train_count: usize,
    pub test_count: usize,
    pub data_qubits: usize,
    pub resize: ResizePolicy,
}

impl DatasetSpec {
    pub fn new(images: impl Into<PathBuf>, labels: impl Into<PathBuf>, data_qubits: usize) -> Self {
        Self {
            images: images.into(),
            labels: labels.into(),
            class: Some(0),
            train_count: 1000,
            test_count: 250,
            data_qubits,
            resize: ResizePolicy::PadCrop,
        }
    }

    pub fn canvas_side(&self) -> Result<usize> {
        canvas_side(self.data_qubits)
    }
}

/// Side length of the square canvas holding `2^D` pixels.
pub fn canvas_side(data_qubits: usize) -> Result<usize> {
    if data_qubits == 0 || data_qubits % 2 != 0 {
        return Err(Error::Config(format!(
            "data qubit count {data_qubits} must be even and >= 2 to form a square image"
        )));
    }
    Ok(1 << (data_qubits / 2))
}

/// Which part of a canvas the critic and the metrics see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticView {
    pub canvas: usize,
    /// Centered source-resolution window, when the canvas was padded.
    pub window: Option<CenteredRegion>,
}

impl CriticView {
    pub fn full(canvas: usize) -> Self {
        Self { canvas, window: None }
    }

    pub fn for_policy(policy: ResizePolicy, canvas: usize, orig_h: usize, orig_w: usize) -> Self {
        match policy {
            ResizePolicy::PadCrop if canvas >= orig_h && canvas >= orig_w => Self {
                canvas,
                window: Some(CenteredRegion::new(canvas, orig_h, orig_w)),
            },
            _ => Self::full(canvas),
        }
    }

    pub fn height(&self) -> usize {
        self.window.map_or(self.canvas, |w| w.height)
    }

    pub fn width(&self) -> usize {
        self.window.map_or(self.canvas, |w| w.width)
    }

    pub fn len(&self) -> usize {
        self.height() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extract(&self, canvas: &[f64]) -> Vec<f64> {
        match self.window {
            Some(w) => w.extract(canvas),
            None => canvas.to_vec(),
        }
    }

    /// Adjoint of [`CriticView::extract`]: scatters a window gradient onto the
    /// canvas, zero outside the window.
    pub fn scatter(&self, window_grad: &[f64]) -> Vec<f64> {
        match self.window {
            Some(w) => w.embed(window_grad),
            None => window_grad.to_vec(),
        }
    }
}

/// A batch of square images in `[0, 1]`, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<Vec<f64>>,
    pub orig_h: usize,
    pub orig_w: usize,
}

impl ImageBatch {
    pub fn new(height: usize, width: usize, pixels: Vec<Vec<f64>>) -> Result<Self> {
        for img in &pixels {
            if img.len() != height * width {
                return Err(Error::Shape {
                    context: "image batch row",
                    expected: height * width,
                    actual: img.len(),
                });
            }
        }
        Ok(Self {
            height,
            width,
            pixels,
            orig_h: height,
            orig_w: width,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width
    }

    pub fn view(&self, view: &CriticView) -> ImageBatch {
        ImageBatch {
            height: view.height(),
            width: view.width(),
            pixels: self.pixels.iter().map(|p| view.extract(p)).collect(),
            orig_h: self.orig_h,
            orig_w: self.orig_w,
        }
    }
}

/// A prepared split at canvas resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub images: ImageBatch,
    /// Index of each image in the source file.
    pub source_indices: Vec<usize>,
    pub view: CriticView,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shuffled batches for `epoch`. The order is a pure function of
    /// `(seed, epoch)`: each epoch uses its own ChaCha stream.
    pub fn batches(&self, batch_size: usize, seed: u64, epoch: u64) -> Batches<'_> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch);
        order.shuffle(&mut rng);
        Batches {
            set: self,
            order,
            batch_size: batch_size.max(1),
            pos: 0,
        }
    }
}

pub struct Batches<'a> {
    set: &'a ImageSet,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    pub fn indices(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for Batches<'_> {
    type Item = ImageBatch;

    fn next(&mut self) -> Option<ImageBatch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let imgs = &self.set.images;
        let pixels = self.order[self.pos..end]
            .iter()
            .map(|&i| imgs.pixels[i].clone())
            .collect();
        self.pos = end;
        Some(ImageBatch {
            height: imgs.height,
            width: imgs.width,
            pixels,
            orig_h: imgs.orig_h,
            orig_w: imgs.orig_w,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

fn adapt(raw: &RawDataset, idx: &[usize], policy: ResizePolicy, side: usize) -> ImageBatch {
    let region = CenteredRegion::new(side, raw.rows, raw.cols);
    let pixels = idx
        .iter()
        .map(|&i| {
            let src = &raw.images[i];
            match policy {
                ResizePolicy::DownsamplePow2 => area_resample(src, raw.rows, raw.cols, side, side),
                ResizePolicy::PadCrop => region.embed(src),
            }
        })
        .collect();
    ImageBatch {
        height: side,
        width: side,
        pixels,
        orig_h: raw.rows,
        orig_w: raw.cols,
    }
}

/// Filters, shuffles (seeded), splits and resizes an already-loaded dataset.
pub fn prepare_raw(raw: &RawDataset, spec: &DatasetSpec, seed: u64) -> Result<(ImageSet, ImageSet)> {
    let side = spec.canvas_side()?;
    if spec.train_count == 0 || spec.test_count == 0 {
        return Err(Error::Dataset("train and test counts must both be >= 1".into()));
    }
    let mut matching: Vec<usize> = raw
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| spec.class.is_none_or(|c| c == l))
        .map(|(i, _)| i)
        .collect();
    let need = spec.train_count + spec.test_count;
    if matching.len() < need {
        return Err(Error::Dataset(format!(
            "class {} has {} images, {} requested ({} train + {} test)",
            spec.class.map_or("all".to_string(), |c| c.to_string()),
            matching.len(),
            need,
            spec.train_count,
            spec.test_count
        )));
    }
    matching.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, rest) = matching[..need].split_at(spec.train_count);
    let view = CriticView::for_policy(spec.resize, side, raw.rows, raw.cols);
    let make = |idx: &[usize]| ImageSet {
        images: adapt(raw, idx, spec.resize, side),
        source_indices: idx.to_vec(),
        view,
    };
    Ok((make(train_idx), make(rest)))
}

pub fn prepare(spec: &DatasetSpec, seed: u64) -> Result<(ImageSet, ImageSet)> {
    let raw = load_idx(&spec.images, &spec.labels)?;
    prepare_raw(&raw, spec, seed)
}

//! Dataset ingestion, splitting, resolution adaptation and batching.

mod dataset;
pub mod idx;
mod resize;

pub use dataset::{canvas_side, prepare, prepare_raw, Batches, CriticView, DatasetSpec, ImageBatch, ImageSet, ResizePolicy};
pub use idx::{load_idx, RawDataset};
pub use resize::{area_resample, CenteredRegion};

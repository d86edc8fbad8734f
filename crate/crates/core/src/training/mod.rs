//! Generator composition, the adversarial loop and checkpoints.

pub mod checkpoint;
mod generator;
mod trainer;

pub use checkpoint::{load_checkpoint, restore_checkpoint, save_checkpoint};
pub use generator::{
    GeneratedSample, Generator, GeneratorGradients, GeneratorInput, NoiseSource, OutputMapping, SampleTape, MAX_REDRAWS,
};
pub use trainer::{EpochLog, GroupUpdates, ParamGroup, StepCounters, Trainer};

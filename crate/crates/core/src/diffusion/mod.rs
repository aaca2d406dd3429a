//! Joint lattice/coordinate diffusion conditioned on symmetry and a property.

pub mod checkpoint;
pub mod embedding;
pub mod lattice_code;
pub mod model;
pub mod sample;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use embedding::{fourier_relative_embedding, rbf_property_embedding, sinusoidal_time_embedding, RbfGrid};
pub use lattice_code::LatticeDof;
pub use model::{build_input_features, denoiser_forward, predict, DenoiserOutput, DenoiserParams, ModelConfig};
pub use sample::{sample, sample_batch, SampleConfig, SampleRequest};
pub use schedule::{forward_noise_coords, forward_noise_lattice, NoiseSchedule, ScheduleConfig};
pub use tensor::{Tape, Tensor, Var};
pub use train::{train, EpochStats, TrainConfig, TrainedModel, TrainingExample, TrainingRecord};

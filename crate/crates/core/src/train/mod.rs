//! Alternating discriminator/generator optimization, checkpoints and resumable runs.

pub mod checkpoint;
pub mod config;
pub mod optim;
pub mod run;
pub mod step;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION};
pub use config::TrainConfig;
pub use optim::Adam;
pub use run::{prepare_run, resume_run, train_run, RunData, RunOutput};
pub use step::{StepLosses, TraceEvent, TrainState};

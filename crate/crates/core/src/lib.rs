//! Unpaired glyph-to-glyph translation: a cycle-consistent GAN whose discriminator
//! also predicts a 32-bit stroke encoding, plus an optional L1 term on a small
//! paired subset.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod stroke;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Generator32 = model::Generator<f32>;
pub type Generator64 = model::Generator<f64>;
pub type Discriminator32 = model::Discriminator<f32>;
pub type Discriminator64 = model::Discriminator<f64>;
pub type Networks32 = model::Networks<f32>;
pub type Networks64 = model::Networks<f64>;
pub type TrainState32 = train::TrainState<f32>;
pub type TrainState64 = train::TrainState<f64>;
pub type Batch32 = data::Batch<f32>;
pub type Batch64 = data::Batch<f64>;

//! Minimal CPU layers with hand-written backward passes.
//!
//! Every forward returns an explicit cache instead of storing state in the layer, so
//! the same module can be applied several times in one step (the generator runs on
//! its own output for the cycle term) and each application is differentiated
//! independently.

pub mod act;
pub mod block;
pub mod conv;
pub mod norm;
pub mod param;

pub use act::Activation;
pub use block::{ConvBlock, DeconvBlock, ResBlock};
pub use conv::{Conv2d, ConvTranspose2d};
pub use norm::BatchNorm2d;
pub use param::{Param, Parameterized};

/// Train mode normalizes with batch statistics and updates running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

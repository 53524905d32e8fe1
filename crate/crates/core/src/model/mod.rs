//! Generator and dual-head discriminator.

pub mod discriminator;
pub mod generator;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use discriminator::{realism_map_size, Discriminator, DiscriminatorOutput};
pub use generator::Generator;

use crate::nn::{Param, Parameterized};
use crate::scalar::Scalar;

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of the first generator / discriminator layer (64 in the reference plan).
    pub base_channels: usize,
    pub res_blocks: usize,
    /// Classical formulation with a separate reverse generator for the cycle term.
    pub two_generators: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_channels: 64,
            res_blocks: 9,
            two_generators: false,
        }
    }
}

/// All trainable networks of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks<T> {
    pub generator: Generator<T>,
    /// Present only with `two_generators`; maps target glyphs back to the source font.
    pub reverse: Option<Generator<T>>,
    pub discriminator: Discriminator<T>,
}

impl<T: Scalar> Networks<T> {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            generator: Generator::new(config.base_channels, config.res_blocks),
            reverse: config
                .two_generators
                .then(|| Generator::new(config.base_channels, config.res_blocks)),
            discriminator: Discriminator::new(config.base_channels),
        }
    }

    /// Gaussian(0, 0.02) conv weights, zero biases, unit norm scales; reproducible per seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut nets = Self::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        nets.generator.init_normal(INIT_STD, &mut rng);
        if let Some(r) = &mut nets.reverse {
            r.init_normal(INIT_STD, &mut rng);
        }
        nets.discriminator.init_normal(INIT_STD, &mut rng);
        nets
    }

    /// Parameters updated by the generator-side optimizer.
    pub fn visit_generator_side_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.generator.visit_mut("generator", f);
        if let Some(r) = &mut self.reverse {
            r.visit_mut("reverse", f);
        }
    }
}

impl<T: Scalar> Parameterized<T> for Networks<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.generator.visit(&crate::nn::param::join(prefix, "generator"), f);
        if let Some(r) = &self.reverse {
            r.visit(&crate::nn::param::join(prefix, "reverse"), f);
        }
        self.discriminator.visit(&crate::nn::param::join(prefix, "discriminator"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.generator.visit_mut(&crate::nn::param::join(prefix, "generator"), f);
        if let Some(r) = &mut self.reverse {
            r.visit_mut(&crate::nn::param::join(prefix, "reverse"), f);
        }
        self.discriminator.visit_mut(&crate::nn::param::join(prefix, "discriminator"), f);
    }
}

/// Alias kept for callers that think in terms of the two parameter trees.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> (Generator<T>, Discriminator<T>) {
    let nets = Networks::<T>::init(config, seed);
    (nets.generator, nets.discriminator)
}

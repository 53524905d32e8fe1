use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FewShotStrategy;
use crate::error::{Error, Result};
use crate::losses::{GeneratorAdvLoss, LossWeights};
use crate::model::ModelConfig;

/// Everything that determines a training run.
///
/// The text form is one `key = value` per line with `#` comments; see
/// [`TrainConfig::KEYS`] for the accepted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many steps even if epochs remain; 0 disables the cap.
    pub max_steps: u64,
    /// Linear decay of the learning rate to zero over the last this-many steps; 0 disables.
    pub lr_decay_steps: u64,
    pub weights: LossWeights,
    pub generator_loss: GeneratorAdvLoss,
    /// Also train the stroke head on real target glyphs.
    pub stroke_on_real: bool,
    pub fewshot: FewShotStrategy,
    /// When positive, train without pairs on the copy-augmented list instead of the plan.
    pub copy_augment: f64,
    pub seed: u64,
    pub resolution: usize,
    /// Checkpoint period in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 8,
            epochs: 200,
            max_steps: 0,
            lr_decay_steps: 0,
            weights: LossWeights::default(),
            generator_loss: GeneratorAdvLoss::NonSaturating,
            stroke_on_real: false,
            fewshot: FewShotStrategy::Random { fraction: 0.2 },
            copy_augment: 0.0,
            seed: 0,
            resolution: 128,
            checkpoint_every: 1000,
            model: ModelConfig::default(),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 21] = [
        "learning_rate",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
        "batch_size",
        "epochs",
        "max_steps",
        "lr_decay_steps",
        "lambda_cyc",
        "lambda_stroke",
        "lambda_fs3",
        "generator_loss",
        "stroke_on_real",
        "fewshot",
        "copy_augment",
        "seed",
        "resolution",
        "checkpoint_every",
        "base_channels",
        "res_blocks",
        "two_generators",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || Error::InvalidConfig(format!("invalid value {value:?} for {key}"));
        macro_rules! num {
            () => {
                value.parse().map_err(|_| bad())?
            };
        }
        match key.trim() {
            "learning_rate" => self.learning_rate = num!(),
            "adam_beta1" => self.adam_beta1 = num!(),
            "adam_beta2" => self.adam_beta2 = num!(),
            "adam_eps" => self.adam_eps = num!(),
            "batch_size" => self.batch_size = num!(),
            "epochs" => self.epochs = num!(),
            "max_steps" => self.max_steps = num!(),
            "lr_decay_steps" => self.lr_decay_steps = num!(),
            "lambda_cyc" => self.weights.lambda_cyc = num!(),
            "lambda_stroke" => self.weights.lambda_stroke = num!(),
            "lambda_fs3" => self.weights.lambda_fs3 = num!(),
            "generator_loss" => {
                self.generator_loss = match value {
                    "non-saturating" => GeneratorAdvLoss::NonSaturating,
                    "saturating" => GeneratorAdvLoss::Saturating,
                    _ => return Err(bad()),
                }
            }
            "stroke_on_real" => self.stroke_on_real = parse_bool(value).ok_or_else(bad)?,
            "fewshot" => self.fewshot = value.parse()?,
            "copy_augment" => self.copy_augment = num!(),
            "seed" => self.seed = num!(),
            "resolution" => self.resolution = num!(),
            "checkpoint_every" => self.checkpoint_every = num!(),
            "base_channels" => self.model.base_channels = num!(),
            "res_blocks" => self.model.res_blocks = num!(),
            "two_generators" => self.model.two_generators = parse_bool(value).ok_or_else(bad)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "learning_rate" => self.learning_rate.to_string(),
            "adam_beta1" => self.adam_beta1.to_string(),
            "adam_beta2" => self.adam_beta2.to_string(),
            "adam_eps" => self.adam_eps.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "lr_decay_steps" => self.lr_decay_steps.to_string(),
            "lambda_cyc" => self.weights.lambda_cyc.to_string(),
            "lambda_stroke" => self.weights.lambda_stroke.to_string(),
            "lambda_fs3" => self.weights.lambda_fs3.to_string(),
            "generator_loss" => match self.generator_loss {
                GeneratorAdvLoss::NonSaturating => "non-saturating".into(),
                GeneratorAdvLoss::Saturating => "saturating".into(),
            },
            "stroke_on_real" => self.stroke_on_real.to_string(),
            "fewshot" => self.fewshot.to_string(),
            "copy_augment" => self.copy_augment.to_string(),
            "seed" => self.seed.to_string(),
            "resolution" => self.resolution.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "base_channels" => self.model.base_channels.to_string(),
            "res_blocks" => self.model.res_blocks.to_string(),
            "two_generators" => self.model.two_generators.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedRecord {
                line: i + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key in canonical order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail(format!("Adam betas ({}, {}) must lie in [0, 1)", self.adam_beta1, self.adam_beta2));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be finite and >= 0", self.learning_rate));
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be > 0".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.copy_augment) {
            return Err(Error::PercentOutOfRange(self.copy_augment));
        }
        if let FewShotStrategy::Random { fraction } = self.fewshot {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::PercentOutOfRange(fraction));
            }
        }
        if self.resolution < 32 || self.resolution % 8 != 0 {
            return fail(format!("resolution {} must be a multiple of 8 and >= 32", self.resolution));
        }
        if self.model.base_channels == 0 {
            return fail("base_channels must be >= 1".into());
        }
        self.weights.validate()
    }

    /// Step count of a run over `batches_per_epoch`-sized epochs.
    pub fn total_steps(&self, batches_per_epoch: usize) -> u64 {
        let full = (self.epochs * batches_per_epoch) as u64;
        if self.max_steps > 0 {
            full.min(self.max_steps)
        } else {
            full
        }
    }

    /// Learning rate for the update numbered `step` (0-based) of a `total`-step run.
    pub fn learning_rate_at(&self, step: u64, total: u64) -> f64 {
        if self.lr_decay_steps == 0 || total == 0 {
            return self.learning_rate;
        }
        let start = total.saturating_sub(self.lr_decay_steps);
        if step < start {
            self.learning_rate
        } else {
            let span = (total - start) as f64;
            self.learning_rate * (1.0 - (step - start) as f64 / span)
        }
    }
}

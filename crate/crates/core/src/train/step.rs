use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::Adam;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::losses::{
    cycle_loss, cycle_loss_grad, discriminator_adv_from_logits, fs3_loss, fs3_loss_grad, generator_adv_from_logits,
    stroke_loss, stroke_loss_grad, total_loss, LossBreakdown, LossParts,
};
use crate::model::Networks;
use crate::nn::{Mode, Parameterized};
use crate::scalar::{lit, Scalar};

/// Losses of one training step, in the column order of the loss CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: u64,
    /// `E[log D(y)] + E[log(1 - D(G(x)))]` as seen by the discriminator update.
    pub adv_d: f64,
    /// Generator-side adversarial loss.
    pub adv_g: f64,
    pub cyc: f64,
    pub stroke: f64,
    pub fs3: f64,
    /// Weighted objective built from `adv_d` and the three auxiliary terms.
    pub total: f64,
}

impl StepLosses {
    pub const CSV_HEADER: &'static str = "step,L_adv_D,L_adv_G,L_cyc,L_stroke,L_FS3,total";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step, self.adv_d, self.adv_g, self.cyc, self.stroke, self.fs3, self.total
        )
    }

    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return None;
        }
        let num = |i: usize| f[i].parse::<f64>().ok();
        Some(Self {
            step: f[0].parse().ok()?,
            adv_d: num(1)?,
            adv_g: num(2)?,
            cyc: num(3)?,
            stroke: num(4)?,
            fs3: num(5)?,
            total: num(6)?,
        })
    }
}

/// Events recorded by [`TrainState::trace`] when enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    GeneratorForward,
    /// Discriminator pass, tagged with a checksum of its parameters at that moment.
    DiscriminatorForward { checksum: f64 },
    DiscriminatorUpdate { checksum_after: f64 },
    GeneratorUpdate,
}

/// Parameters, optimizer moments and data cursor of a run.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub config: TrainConfig,
    pub nets: Networks<T>,
    pub g_opt: Adam<T>,
    pub d_opt: Adam<T>,
    /// Completed steps.
    pub step: u64,
    /// Position of the next batch.
    pub epoch: u64,
    pub batch_index: u64,
    /// Call-sequence log for tests; `None` disables recording.
    pub trace: Option<Vec<TraceEvent>>,
}

impl<T: Scalar> PartialEq for TrainState<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.nets == other.nets
            && self.g_opt == other.g_opt
            && self.d_opt == other.d_opt
            && self.step == other.step
            && self.epoch == other.epoch
            && self.batch_index == other.batch_index
    }
}

/// Sum of all discriminator parameter values; identifies a parameter version in traces.
pub fn discriminator_checksum<T: Scalar>(nets: &Networks<T>) -> f64 {
    let mut s = 0.0;
    nets.discriminator.visit("", &mut |_, p| {
        if p.trainable {
            s += p.value.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum::<f64>();
        }
    });
    s
}

fn finite(term: &'static str, value: f64, batch: &[char]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        let chars: String = batch.iter().map(|c| format!("U+{:04X} ", *c as u32)).collect();
        log::error!("non-finite {term} = {value} on batch [{}]", chars.trim_end());
        Err(Error::NonFiniteLoss { term, value })
    }
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Derivative through the sigmoid: `dL/dlogit = dL/dp · p·(1 - p)`.
fn through_sigmoid<T: Scalar>(d_prob: &Array2<T>, prob: &Array2<T>) -> Array2<T> {
    let mut g = d_prob.clone();
    g.zip_mut_with(prob, |d, &p| *d = *d * p * (T::one() - p));
    g
}

impl<T: Scalar> TrainState<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut nets = Networks::init(&config.model, config.seed);
        let g_opt = Adam::new(config.adam_beta1, config.adam_beta2, config.adam_eps, |f| {
            nets.visit_generator_side_mut(f)
        });
        let d_opt = Adam::new(config.adam_beta1, config.adam_beta2, config.adam_eps, |f| {
            nets.discriminator.visit_mut("discriminator", f)
        });
        Ok(Self {
            config,
            nets,
            g_opt,
            d_opt,
            step: 0,
            epoch: 0,
            batch_index: 0,
            trace: None,
        })
    }

    fn record(&mut self, e: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(e);
        }
    }

    fn record_d_forward(&mut self) {
        if self.trace.is_some() {
            let checksum = discriminator_checksum(&self.nets);
            self.record(TraceEvent::DiscriminatorForward { checksum });
        }
    }

    /// Generator output for `x` without touching any statistics.
    pub fn translate(&mut self, x: &Array4<T>) -> Result<Array4<T>> {
        Ok(self.nets.generator.forward(x, Mode::Eval)?.0)
    }

    /// One discriminator update followed by one generator update against the updated
    /// discriminator. `lr` is the learning rate for both updates.
    pub fn train_step(&mut self, batch: &Batch<T>, lr: f64) -> Result<StepLosses> {
        let cfg = self.config.clone();
        let w = cfg.weights;
        let lam_stroke = lit::<T>(w.lambda_stroke);
        let cps = &batch.codepoints;
        self.nets.zero_grad();

        let (fake, g_cache) = self.nets.generator.forward(&batch.source, Mode::Train)?;
        self.record(TraceEvent::GeneratorForward);

        // discriminator update on (real, detached fake)
        self.record_d_forward();
        let (out_real, cache_real) = self.nets.discriminator.forward(&batch.real_target, Mode::Train)?;
        self.record_d_forward();
        let (out_fake, cache_fake) = self.nets.discriminator.forward(&fake, Mode::Train)?;
        let (neg_adv, g_real, g_fake) = discriminator_adv_from_logits(&out_real.realism_logits, &out_fake.realism_logits);
        let adv_d = finite("L_adv_D", -f(neg_adv), cps)?;
        finite("L_stroke_D", f(stroke_loss::<_, _, T>(&out_fake.stroke, &batch.encodings)?), cps)?;
        let d_stroke_fake = through_sigmoid(&stroke_loss_grad(&out_fake.stroke, &batch.encodings), &out_fake.stroke)
            .mapv(|g| g * lam_stroke);
        let d_stroke_real = if cfg.stroke_on_real {
            finite("L_stroke_real", f(stroke_loss::<_, _, T>(&out_real.stroke, &batch.real_encodings)?), cps)?;
            through_sigmoid(&stroke_loss_grad(&out_real.stroke, &batch.real_encodings), &out_real.stroke)
                .mapv(|g| g * lam_stroke)
        } else {
            Array2::zeros(out_real.stroke.raw_dim())
        };
        self.nets.discriminator.backward(&cache_real, &g_real, &d_stroke_real);
        self.nets.discriminator.backward(&cache_fake, &g_fake, &d_stroke_fake);
        let nets = &mut self.nets;
        self.d_opt.step(lr, |f| nets.discriminator.visit_mut("discriminator", f));
        self.nets.discriminator.zero_grad();
        if self.trace.is_some() {
            let checksum_after = discriminator_checksum(&self.nets);
            self.record(TraceEvent::DiscriminatorUpdate { checksum_after });
        }

        // generator update through the updated discriminator
        self.record_d_forward();
        let (out, d_cache) = self.nets.discriminator.forward(&fake, Mode::Train)?;
        let (adv_g, d_adv) = generator_adv_from_logits(&out.realism_logits, cfg.generator_loss);
        let adv_g = finite("L_adv_G", f(adv_g), cps)?;
        let stroke = finite("L_stroke", f(stroke_loss::<_, _, T>(&out.stroke, &batch.encodings)?), cps)?;
        let d_stroke =
            through_sigmoid(&stroke_loss_grad(&out.stroke, &batch.encodings), &out.stroke).mapv(|g| g * lam_stroke);

        let (rec, rec_cache) = match &mut self.nets.reverse {
            Some(r) => r.forward(&fake, Mode::Train)?,
            None => self.nets.generator.forward(&fake, Mode::Train)?,
        };
        self.record(TraceEvent::GeneratorForward);
        let cyc = finite("L_cyc", f(cycle_loss::<_, _, _, T>(&batch.source, &rec)?), cps)?;
        let fs3 = finite(
            "L_FS3",
            f(fs3_loss::<_, _, _, T>(&fake, &batch.paired_target, &batch.has_pair)?),
            cps,
        )?;

        let mut d_fake = self.nets.discriminator.backward(&d_cache, &d_adv, &d_stroke);
        let d_rec = cycle_loss_grad(&batch.source, &rec).mapv(|g| g * lit::<T>(w.lambda_cyc));
        d_fake += &match &mut self.nets.reverse {
            Some(r) => r.backward(&rec_cache, &d_rec),
            None => self.nets.generator.backward(&rec_cache, &d_rec),
        };
        let lam_fs3 = lit::<T>(w.lambda_fs3);
        d_fake.zip_mut_with(&fs3_loss_grad(&fake, &batch.paired_target, &batch.has_pair), |d, &g| {
            *d += g * lam_fs3
        });
        self.nets.generator.backward(&g_cache, &d_fake);
        let nets = &mut self.nets;
        self.g_opt.step(lr, |f| nets.visit_generator_side_mut(f));
        self.nets.zero_grad();
        self.record(TraceEvent::GeneratorUpdate);

        let LossBreakdown { total, .. } = total_loss(
            &LossParts {
                adv: adv_d,
                cyc,
                stroke,
                fs3,
            },
            &w,
        )?;
        self.step += 1;
        Ok(StepLosses {
            step: self.step,
            adv_d,
            adv_g,
            cyc,
            stroke,
            fs3,
            total,
        })
    }
}

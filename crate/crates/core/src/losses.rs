//! Adversarial, cycle, stroke-reconstruction and few-shot paired losses.
//!
//! Every loss has a matching `*_grad` returning the derivative with respect to the
//! argument the networks produce, so the training step can chain them into the
//! hand-written backward passes.

use ndarray::{Array, Array1, Array2, ArrayBase, Axis, Data, Dimension, Ix2, RemoveAxis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::nn::act::sigmoid;
use crate::scalar::{lit, Scalar};
use crate::stroke::NUM_STROKE_TYPES;

/// Clamp applied to probabilities before taking logs.
pub const LOG_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_stroke: f64,
    pub lambda_fs3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cyc: 1.0,
            lambda_stroke: 1.0,
            lambda_fs3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_stroke", self.lambda_stroke),
            ("lambda_fs3", self.lambda_fs3),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Generator-side adversarial objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GeneratorAdvLoss {
    /// Minimize `-E[log D(G(x))]`.
    #[default]
    NonSaturating,
    /// Minimize `E[log(1 - D(G(x)))]`, the literal min-max form.
    Saturating,
}

fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count fits in scalar")
}

fn check_probabilities<S, D, T>(a: &ArrayBase<S, D>) -> Result<()>
where
    S: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    for &v in a.iter() {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::DomainError(v.to_f64().unwrap_or(f64::NAN)));
        }
    }
    Ok(())
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = lit::<T>(LOG_EPS);
    p.max(eps).min(T::one() - eps)
}

fn mean_of<S, D, T, F>(a: &ArrayBase<S, D>, f: F) -> T
where
    S: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
    F: Fn(T) -> T,
{
    if a.is_empty() {
        return T::zero();
    }
    a.iter().fold(T::zero(), |acc, &v| acc + f(v)) / count(a.len())
}

/// `E[log d_real] + E[log(1 - d_fake)]`, means taken over batch and patch positions.
pub fn adversarial_loss<S1, S2, D, T>(d_real: &ArrayBase<S1, D>, d_fake: &ArrayBase<S2, D>) -> Result<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    check_probabilities(d_real)?;
    check_probabilities(d_fake)?;
    Ok(mean_of(d_real, |p| clamp_prob(p).ln()) + mean_of(d_fake, |p| (T::one() - clamp_prob(p)).ln()))
}

/// Gradients of [`adversarial_loss`] with respect to both probability maps.
/// Entries clamped away from the log domain get zero gradient.
pub fn adversarial_loss_grad<S1, S2, D, T>(
    d_real: &ArrayBase<S1, D>,
    d_fake: &ArrayBase<S2, D>,
) -> (Array<T, D>, Array<T, D>)
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    let eps = lit::<T>(LOG_EPS);
    let inside = move |p: T| p > eps && p < T::one() - eps;
    let nr: T = count(d_real.len().max(1));
    let nf: T = count(d_fake.len().max(1));
    let gr = d_real.mapv(|p| if inside(p) { T::one() / (nr * p) } else { T::zero() });
    let gf = d_fake.mapv(|p| if inside(p) { -T::one() / (nf * (T::one() - p)) } else { T::zero() });
    (gr, gf)
}

/// Discriminator loss `-L_adv` and its gradients with respect to the realism logits.
pub fn discriminator_adv_from_logits<S1, S2, D, T>(
    real_logits: &ArrayBase<S1, D>,
    fake_logits: &ArrayBase<S2, D>,
) -> (T, Array<T, D>, Array<T, D>)
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    let pr = real_logits.mapv(sigmoid);
    let pf = fake_logits.mapv(sigmoid);
    let value = mean_of(&pr, |p| clamp_prob(p).ln()) + mean_of(&pf, |p| (T::one() - clamp_prob(p)).ln());
    let nr: T = count(pr.len().max(1));
    let nf: T = count(pf.len().max(1));
    let gr = pr.mapv(|p| -(T::one() - p) / nr);
    let gf = pf.mapv(|p| p / nf);
    (-value, gr, gf)
}

/// Generator adversarial loss and its gradient with respect to the fake realism logits.
pub fn generator_adv_from_logits<S, D, T>(fake_logits: &ArrayBase<S, D>, kind: GeneratorAdvLoss) -> (T, Array<T, D>)
where
    S: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    let pf = fake_logits.mapv(sigmoid);
    let n: T = count(pf.len().max(1));
    match kind {
        GeneratorAdvLoss::NonSaturating => (
            -mean_of(&pf, |p| clamp_prob(p).ln()),
            pf.mapv(|p| -(T::one() - p) / n),
        ),
        GeneratorAdvLoss::Saturating => (
            mean_of(&pf, |p| (T::one() - clamp_prob(p)).ln()),
            pf.mapv(|p| -p / n),
        ),
    }
}

/// Mean absolute difference between inputs and their reconstructions.
pub fn cycle_loss<S1, S2, D, T>(x: &ArrayBase<S1, D>, x_rec: &ArrayBase<S2, D>) -> Result<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    if x.shape() != x_rec.shape() {
        return Err(shape_mismatch(x.shape(), x_rec.shape()));
    }
    if x.is_empty() {
        return Ok(T::zero());
    }
    let sum = Zip::from(x).and(x_rec).fold(T::zero(), |acc, &a, &b| acc + (a - b).abs());
    Ok(sum / count(x.len()))
}

fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Gradient of [`cycle_loss`] with respect to `x_rec`.
pub fn cycle_loss_grad<S1, S2, D, T>(x: &ArrayBase<S1, D>, x_rec: &ArrayBase<S2, D>) -> Array<T, D>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
    T: Scalar,
{
    let n: T = count(x.len().max(1));
    let mut g = x_rec.to_owned();
    g.zip_mut_with(x, |r, &a| *r = sign(*r - a) / n);
    g
}

fn check_encodings<S: Data<Elem = T>, T: Scalar>(target: &ArrayBase<S, Ix2>) -> Result<()> {
    for (i, row) in target.axis_iter(Axis(0)).enumerate() {
        if row.iter().any(|&v| v != T::zero() && v != T::one()) {
            return Err(Error::InvalidEncoding(format!("row {i} has a non-binary component")));
        }
    }
    Ok(())
}

/// Batch mean of the Euclidean norm of `predicted - target` over the 32 stroke types.
pub fn stroke_loss<S1, S2, T>(predicted: &ArrayBase<S1, Ix2>, target: &ArrayBase<S2, Ix2>) -> Result<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    T: Scalar,
{
    if predicted.shape() != target.shape() || predicted.ncols() != NUM_STROKE_TYPES {
        return Err(shape_mismatch(target.shape(), predicted.shape()));
    }
    check_encodings(target)?;
    if predicted.nrows() == 0 {
        return Ok(T::zero());
    }
    let norms = row_norms(predicted, target);
    Ok(norms.sum() / count(predicted.nrows()))
}

fn row_norms<S1, S2, T>(p: &ArrayBase<S1, Ix2>, c: &ArrayBase<S2, Ix2>) -> Array1<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    T: Scalar,
{
    Array1::from_iter(
        p.axis_iter(Axis(0))
            .zip(c.axis_iter(Axis(0)))
            .map(|(a, b)| Zip::from(&a).and(&b).fold(T::zero(), |acc, &x, &y| acc + (x - y) * (x - y)).sqrt()),
    )
}

/// Gradient of [`stroke_loss`] with respect to `predicted`; zero for exactly reconstructed rows.
pub fn stroke_loss_grad<S1, S2, T>(predicted: &ArrayBase<S1, Ix2>, target: &ArrayBase<S2, Ix2>) -> Array2<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    T: Scalar,
{
    let b: T = count(predicted.nrows().max(1));
    let norms = row_norms(predicted, target);
    let mut g = predicted.to_owned();
    for ((mut row, crow), &n) in g.axis_iter_mut(Axis(0)).zip(target.axis_iter(Axis(0))).zip(norms.iter()) {
        if n > T::zero() {
            row.zip_mut_with(&crow, |p, &c| *p = (*p - c) / (n * b));
        } else {
            row.fill(T::zero());
        }
    }
    g
}

fn check_mask<S1, S2, D, T>(generated: &ArrayBase<S1, D>, truth: &ArrayBase<S2, D>, mask: &[bool]) -> Result<()>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
{
    if generated.shape() != truth.shape() {
        return Err(shape_mismatch(generated.shape(), truth.shape()));
    }
    if generated.ndim() == 0 || generated.shape()[0] != mask.len() {
        return Err(shape_mismatch(format!("mask of {} rows", mask.len()), generated.shape()));
    }
    Ok(())
}

/// Per-pixel mean absolute difference over the batch rows flagged in `mask`; 0 if none.
pub fn fs3_loss<S1, S2, D, T>(generated: &ArrayBase<S1, D>, paired_truth: &ArrayBase<S2, D>, mask: &[bool]) -> Result<T>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: RemoveAxis,
    T: Scalar,
{
    check_mask(generated, paired_truth, mask)?;
    let mut sum = T::zero();
    let mut n = 0usize;
    for ((g, y), &m) in generated
        .axis_iter(Axis(0))
        .zip(paired_truth.axis_iter(Axis(0)))
        .zip(mask)
    {
        if m {
            sum = sum + Zip::from(&g).and(&y).fold(T::zero(), |acc, &a, &b| acc + (a - b).abs());
            n += g.len();
        }
    }
    Ok(if n == 0 { T::zero() } else { sum / count(n) })
}

/// Gradient of [`fs3_loss`] with respect to `generated`.
pub fn fs3_loss_grad<S1, S2, D, T>(generated: &ArrayBase<S1, D>, paired_truth: &ArrayBase<S2, D>, mask: &[bool]) -> Array<T, D>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: RemoveAxis,
    T: Scalar,
{
    let mut g = generated.to_owned();
    let per_row = if generated.ndim() > 0 && generated.shape()[0] > 0 {
        generated.len() / generated.shape()[0]
    } else {
        0
    };
    let rows = mask.iter().filter(|&&m| m).count();
    let n: T = count((rows * per_row).max(1));
    for ((mut gr, y), &m) in g.axis_iter_mut(Axis(0)).zip(paired_truth.axis_iter(Axis(0))).zip(mask) {
        if m {
            gr.zip_mut_with(&y, |a, &b| *a = sign(*a - b) / n);
        } else {
            gr.fill(T::zero());
        }
    }
    g
}

/// Unweighted values of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub adv: f64,
    pub cyc: f64,
    pub stroke: f64,
    pub fs3: f64,
}

/// Weighted terms in summation order; `total` is their left-to-right sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv: f64,
    pub cyc: f64,
    pub stroke: f64,
    pub fs3: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn terms(&self) -> [f64; 4] {
        [self.adv, self.cyc, self.stroke, self.fs3]
    }
}

/// `L_adv + λ_cyc·L_cyc + λ_stroke·L_stroke + λ_fs3·L_fs3`.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> Result<LossBreakdown> {
    for (term, value) in [("adv", parts.adv), ("cyc", parts.cyc), ("stroke", parts.stroke), ("fs3", parts.fs3)] {
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { term, value });
        }
    }
    weights.validate()?;
    let adv = parts.adv;
    let cyc = weights.lambda_cyc * parts.cyc;
    let stroke = weights.lambda_stroke * parts.stroke;
    let fs3 = weights.lambda_fs3 * parts.fs3;
    let total = adv + cyc + stroke + fs3;
    Ok(LossBreakdown {
        adv,
        cyc,
        stroke,
        fs3,
        total,
    })
}

use std::collections::BTreeMap;

use ndarray::{s, Array2, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fewshot::{AugmentedEntry, FewShotPlan};
use super::glyph::GlyphImage;
use crate::error::{shape_mismatch, Error, Result};
use crate::scalar::Scalar;
use crate::stroke::{StrokeTable, NUM_STROKE_TYPES};

/// Source and target glyphs of one font pair plus the source characters' stroke table.
#[derive(Debug, Clone)]
pub struct GlyphDataset {
    pub source: BTreeMap<char, GlyphImage>,
    pub target: BTreeMap<char, GlyphImage>,
    pub table: StrokeTable,
    pub resolution: usize,
}

impl GlyphDataset {
    pub fn new(source: Vec<GlyphImage>, target: Vec<GlyphImage>, table: StrokeTable) -> Result<Self> {
        let resolution = source.first().map(|g| g.resolution()).ok_or(Error::EmptyDataset)?;
        let mut src = BTreeMap::new();
        let mut tgt = BTreeMap::new();
        for (map, imgs) in [(&mut src, source), (&mut tgt, target)] {
            for img in imgs {
                if img.pixels.dim() != (resolution, resolution) {
                    return Err(shape_mismatch((resolution, resolution), img.pixels.dim()));
                }
                if !img.in_range() {
                    return Err(Error::InvalidConfig(format!(
                        "glyph U+{:04X} of {} has pixels outside [-1, 1]",
                        img.codepoint as u32, img.font_id
                    )));
                }
                map.insert(img.codepoint, img);
            }
        }
        Ok(Self {
            source: src,
            target: tgt,
            table,
            resolution,
        })
    }

    /// Characters present in both fonts and in the stroke table.
    pub fn shared_characters(&self) -> Vec<char> {
        self.source
            .keys()
            .filter(|c| self.target.contains_key(c) && self.table.strokes(**c).is_some())
            .copied()
            .collect()
    }
}

/// One training element: a source character and whether its target pair is exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainEntry {
    pub codepoint: char,
    pub has_pair: bool,
}

/// A mini-batch. `paired_target` rows are zero where `has_pair` is false.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub codepoints: Vec<char>,
    pub source: Array4<T>,
    pub encodings: Array2<T>,
    pub real_target: Array4<T>,
    /// Stroke encodings of the characters shown in `real_target`.
    pub real_encodings: Array2<T>,
    pub paired_target: Array4<T>,
    pub has_pair: Vec<bool>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.codepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codepoints.is_empty()
    }

    pub fn pixels_in_range(&self) -> bool {
        let ok = |a: &Array4<T>| a.iter().all(|&v| v >= -T::one() && v <= T::one());
        ok(&self.source) && ok(&self.real_target) && ok(&self.paired_target)
    }
}

/// Deterministic epoch ordering over a fixed list of training entries.
///
/// Epoch `e` uses ChaCha8 stream `2e` for the source order and `2e + 1` for the
/// order of the unpaired real targets, so any batch can be rebuilt from
/// `(seed, epoch, index)` alone.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    pub entries: Vec<TrainEntry>,
    /// Distinct characters whose target images serve as unpaired real samples.
    pub target_pool: Vec<char>,
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchSchedule {
    pub fn new(entries: Vec<TrainEntry>, batch_size: usize, seed: u64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        let mut pool: Vec<char> = entries.iter().map(|e| e.codepoint).collect();
        pool.sort_unstable();
        pool.dedup();
        Ok(Self {
            entries,
            target_pool: pool,
            batch_size,
            seed,
        })
    }

    pub fn from_plan(plan: &FewShotPlan, batch_size: usize, seed: u64) -> Result<Self> {
        let entries = plan
            .training_characters()
            .into_iter()
            .map(|c| TrainEntry {
                codepoint: c,
                has_pair: plan.is_paired(c),
            })
            .collect();
        Self::new(entries, batch_size, seed)
    }

    /// Copy-augmented training: every entry unpaired.
    pub fn from_augmented(entries: &[AugmentedEntry], batch_size: usize, seed: u64) -> Result<Self> {
        Self::new(
            entries
                .iter()
                .map(|e| TrainEntry {
                    codepoint: e.codepoint,
                    has_pair: false,
                })
                .collect(),
            batch_size,
            seed,
        )
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.entries.len().div_ceil(self.batch_size)
    }

    fn permutation(&self, n: usize, stream: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx
    }

    /// Entry indices and real-target pool indices of batch `index` in `epoch`.
    pub fn batch_indices(&self, epoch: u64, index: usize) -> (Vec<usize>, Vec<usize>) {
        let order = self.permutation(self.entries.len(), 2 * epoch);
        let targets = self.permutation(self.target_pool.len(), 2 * epoch + 1);
        let start = index * self.batch_size;
        let end = (start + self.batch_size).min(order.len());
        let src = order[start.min(end)..end].to_vec();
        let tgt = (start..end).map(|i| targets[i % targets.len()]).collect();
        (src, tgt)
    }

    pub fn batch<T: Scalar>(&self, data: &GlyphDataset, epoch: u64, index: usize) -> Result<Batch<T>> {
        let (src, tgt) = self.batch_indices(epoch, index);
        let b = src.len();
        let r = data.resolution;
        let mut batch = Batch {
            codepoints: Vec::with_capacity(b),
            source: Array4::zeros((b, 1, r, r)),
            encodings: Array2::zeros((b, NUM_STROKE_TYPES)),
            real_target: Array4::zeros((b, 1, r, r)),
            real_encodings: Array2::zeros((b, NUM_STROKE_TYPES)),
            paired_target: Array4::zeros((b, 1, r, r)),
            has_pair: Vec::with_capacity(b),
        };
        let to_t = |v: &f32| T::from_f32(*v).expect("finite pixel");
        for (row, (&ei, &ti)) in src.iter().zip(&tgt).enumerate() {
            let entry = self.entries[ei];
            let c = entry.codepoint;
            let img = data.source.get(&c).ok_or(Error::UnknownCharacter(c))?;
            batch.source.slice_mut(s![row, 0, .., ..]).assign(&img.pixels.map(to_t));
            let enc = data.table.encode(c)?.to_vector::<T>();
            batch.encodings.row_mut(row).assign(&ndarray::ArrayView1::from(&enc[..]));
            let tc = self.target_pool[ti];
            let enc = data.table.encode(tc)?.to_vector::<T>();
            batch.real_encodings.row_mut(row).assign(&ndarray::ArrayView1::from(&enc[..]));
            let real = data.target.get(&tc).ok_or(Error::UnknownCharacter(tc))?;
            batch.real_target.slice_mut(s![row, 0, .., ..]).assign(&real.pixels.map(to_t));
            if entry.has_pair {
                let truth = data.target.get(&c).ok_or(Error::UnknownCharacter(c))?;
                batch.paired_target.slice_mut(s![row, 0, .., ..]).assign(&truth.pixels.map(to_t));
            }
            batch.codepoints.push(c);
            batch.has_pair.push(entry.has_pair);
        }
        debug_assert!(batch.pixels_in_range());
        Ok(batch)
    }

    /// Iterates one epoch in order.
    pub fn epoch<'a, T: Scalar>(&'a self, data: &'a GlyphDataset, epoch: u64) -> impl Iterator<Item = Result<Batch<T>>> + 'a {
        (0..self.batches_per_epoch()).map(move |i| self.batch(data, epoch, i))
    }
}

/// One epoch of batches for a plan.
pub fn batch_iter<'a, T: Scalar>(
    plan: &FewShotPlan,
    data: &'a GlyphDataset,
    batch_size: usize,
    seed: u64,
) -> Result<impl Iterator<Item = Result<Batch<T>>> + 'a> {
    let schedule = BatchSchedule::from_plan(plan, batch_size, seed)?;
    let n = schedule.batches_per_epoch();
    Ok((0..n).map(move |i| schedule.batch(data, 0, i)))
}

//! FID, perceptual distance, PSNR and SSIM between generated and real glyphs.
//!
//! Metrics work on [0, 1] images; glyphs are rescaled from the [-1, 1] training range
//! at this boundary.

pub mod embed;
pub mod fid;
pub mod image;

use std::collections::BTreeMap;
use std::path::Path;

use ::image::{GrayImage, Luma};
use ndarray::{s, Array2, Array4};
use serde::{Deserialize, Serialize};

pub use self::embed::{perceptual_distance, EmbedInput, FeatureEmbedder, PrecomputedEmbedder, RandomConvEmbedder};
pub use self::fid::fid;
pub use self::image::{psnr, ssim, CompensatedSum, PSNR_CAP_DB};

use crate::data::glyph::unit_to_byte;
use crate::data::GlyphImage;
use crate::error::{Error, Result};
use crate::model::Generator;
use crate::nn::Mode;
use crate::scalar::Scalar;
use crate::stroke::format_codepoint;

/// Aggregate metrics of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: f64,
    pub perceptual: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub n_pairs: usize,
    pub embedder_id: String,
    /// Resolved configuration of the run that produced the generator.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// `[-1, 1]` glyph pixels to `[0, 1]`.
pub fn to_unit_range(pixels: &Array2<f32>) -> Array2<f64> {
    pixels.mapv(|v| (v as f64 + 1.0) / 2.0)
}

/// Runs the generator in eval mode over `sources`, `batch_size` glyphs at a time.
pub fn generate<T: Scalar>(generator: &mut Generator<T>, sources: &[&GlyphImage], batch_size: usize) -> Result<Vec<GlyphImage>> {
    let mut out = Vec::with_capacity(sources.len());
    for chunk in sources.chunks(batch_size.max(1)) {
        let (h, w) = chunk[0].pixels.dim();
        let mut x = Array4::<T>::zeros((chunk.len(), 1, h, w));
        for (i, g) in chunk.iter().enumerate() {
            if g.pixels.dim() != (h, w) {
                return Err(crate::error::shape_mismatch((h, w), g.pixels.dim()));
            }
            x.slice_mut(s![i, 0, .., ..])
                .assign(&g.pixels.mapv(|v| T::from_f32(v).expect("finite pixel")));
        }
        let (y, _) = generator.forward(&x, Mode::Eval)?;
        for (i, g) in chunk.iter().enumerate() {
            let px = y
                .slice(s![i, 0, .., ..])
                .mapv(|v| v.to_f32().unwrap_or(0.0).clamp(-1.0, 1.0));
            out.push(GlyphImage::new(px, g.codepoint, "generated"));
        }
    }
    Ok(out)
}

fn embed_inputs<'a>(keys: &'a [String], pixels: &'a [Array2<f64>]) -> Vec<EmbedInput<'a>> {
    keys.iter()
        .zip(pixels)
        .map(|(key, p)| EmbedInput { key, pixels: p.view() })
        .collect()
}

/// Metrics of `generated[i]` against `truth[i]` (FID over the two sets, the rest averaged over pairs).
pub fn score_pairs(generated: &[GlyphImage], truth: &[GlyphImage], embedder: &dyn FeatureEmbedder) -> Result<MetricReport> {
    if generated.is_empty() || generated.len() != truth.len() {
        return Err(Error::NoPairedTestData);
    }
    let gen01: Vec<Array2<f64>> = generated.iter().map(|g| to_unit_range(&g.pixels)).collect();
    let true01: Vec<Array2<f64>> = truth.iter().map(|g| to_unit_range(&g.pixels)).collect();
    let mut psnr_sum = CompensatedSum::default();
    let mut ssim_sum = CompensatedSum::default();
    for (a, b) in gen01.iter().zip(&true01) {
        psnr_sum.add(psnr(a, b, 1.0)?);
        ssim_sum.add(ssim(a, b, 1.0)?);
    }
    let keys = |prefix: &str, set: &[GlyphImage]| -> Vec<String> {
        set.iter().map(|g| format!("{prefix}/{}", format_codepoint(g.codepoint))).collect()
    };
    let gen_keys = keys("generated", generated);
    let true_keys = keys("real", truth);
    let fg = embedder.embed(&embed_inputs(&gen_keys, &gen01))?;
    let ft = embedder.embed(&embed_inputs(&true_keys, &true01))?;
    let perceptual: CompensatedSum = fg
        .rows()
        .into_iter()
        .zip(ft.rows())
        .map(|(u, v)| embed::perceptual_from_features(u, v))
        .collect();
    let n = generated.len() as f64;
    Ok(MetricReport {
        fid: fid(&ft, &fg)?,
        perceptual: perceptual.value() / n,
        psnr_db: psnr_sum.value() / n,
        ssim: ssim_sum.value() / n,
        n_pairs: generated.len(),
        embedder_id: embedder.identifier(),
        config: BTreeMap::new(),
    })
}

/// Generated glyphs and the report of one evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub generated: Vec<GlyphImage>,
}

/// Translates every source of `pairs` and scores it against the paired truth.
pub fn evaluate<T: Scalar>(
    generator: &mut Generator<T>,
    pairs: &[(&GlyphImage, &GlyphImage)],
    embedder: &dyn FeatureEmbedder,
    batch_size: usize,
) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::NoPairedTestData);
    }
    let sources: Vec<&GlyphImage> = pairs.iter().map(|p| p.0).collect();
    let generated = generate(generator, &sources, batch_size)?;
    let truth: Vec<GlyphImage> = pairs.iter().map(|p| p.1.clone()).collect();
    let report = score_pairs(&generated, &truth, embedder)?;
    Ok(Evaluation { report, generated })
}

/// Rows of `source | generated | truth` glyphs separated by 2-pixel gray rules.
pub fn image_grid(rows: &[[&GlyphImage; 3]]) -> GrayImage {
    const GAP: u32 = 2;
    let Some(first) = rows.first() else {
        return GrayImage::new(0, 0);
    };
    let cell = first[0].resolution() as u32;
    let width = 3 * cell + 4 * GAP;
    let height = rows.len() as u32 * (cell + GAP) + GAP;
    let mut img = GrayImage::from_pixel(width, height, Luma([128]));
    for (r, row) in rows.iter().enumerate() {
        for (c, glyph) in row.iter().enumerate() {
            let (ox, oy) = (GAP + c as u32 * (cell + GAP), GAP + r as u32 * (cell + GAP));
            for ((y, x), &v) in glyph.pixels.indexed_iter() {
                if (x as u32) < cell && (y as u32) < cell {
                    img.put_pixel(ox + x as u32, oy + y as u32, Luma([unit_to_byte(v)]));
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{make_synthetic_font_pair, target_transform};

    #[test]
    fn perfect_model_scores() {
        let pair = make_synthetic_font_pair(40, 2, 32);
        let truth: Vec<GlyphImage> = pair.target.clone();
        let generated: Vec<GlyphImage> = pair
            .source
            .iter()
            .map(|s| GlyphImage::new(target_transform(&s.pixels), s.codepoint, "generated"))
            .collect();
        let r = score_pairs(&generated, &truth, &RandomConvEmbedder::new(0)).unwrap();
        assert_eq!(r.psnr_db, PSNR_CAP_DB);
        assert_eq!(r.ssim, 1.0);
        assert!(r.fid < 1e-6);
        assert_eq!(r.perceptual, 0.0);
        assert_eq!(r.n_pairs, 40);
    }

    #[test]
    fn report_json_round_trip() {
        let mut r = MetricReport {
            fid: 29.83,
            perceptual: 0.1234567890123,
            psnr_db: 17.1,
            ssim: 0.5555555555555556,
            n_pairs: 751,
            embedder_id: "random-conv-v1-seed0".into(),
            config: BTreeMap::new(),
        };
        r.config.insert("seed".into(), "3".into());
        assert_eq!(MetricReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn empty_pairs_rejected() {
        assert!(matches!(
            score_pairs(&[], &[], &RandomConvEmbedder::new(0)),
            Err(Error::NoPairedTestData)
        ));
    }

    #[test]
    fn grid_dimensions() {
        let pair = make_synthetic_font_pair(3, 0, 32);
        let rows: Vec<[&GlyphImage; 3]> = (0..3).map(|i| [&pair.source[i], &pair.target[i], &pair.target[i]]).collect();
        let g = image_grid(&rows);
        assert_eq!(g.dimensions(), (3 * 32 + 8, 3 * 34 + 2));
    }
}

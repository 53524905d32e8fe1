use std::collections::HashMap;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array4, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_mismatch, Error, Result};
use crate::nn::Conv2d;

/// One image handed to an embedder: pixels on [0, 1] plus a stable key
/// (e.g. `generated/U+4E00`) used by embedders that look features up.
#[derive(Debug, Clone, Copy)]
pub struct EmbedInput<'a> {
    pub key: &'a str,
    pub pixels: ArrayView2<'a, f64>,
}

/// Deterministic image → feature-vector mapping behind FID and perceptual distance.
pub trait FeatureEmbedder {
    fn identifier(&self) -> String;
    fn dimension(&self) -> usize;
    /// One row per input.
    fn embed(&self, images: &[EmbedInput<'_>]) -> Result<Array2<f64>>;
}

/// Three stride-2 3×3 ReLU convolutions with seeded He-normal weights, then global
/// average pooling. A fixed stand-in for a pretrained network.
#[derive(Debug, Clone)]
pub struct RandomConvEmbedder {
    pub seed: u64,
    convs: Vec<Conv2d<f64>>,
}

const RANDOM_CONV_WIDTHS: [usize; 4] = [1, 16, 32, 32];
const EMBED_CHUNK: usize = 64;

impl RandomConvEmbedder {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = RANDOM_CONV_WIDTHS
            .windows(2)
            .map(|w| {
                let mut c = Conv2d::new(w[0], w[1], 3, 2, 1);
                c.init_normal((2.0 / (9 * w[0]) as f64).sqrt(), &mut rng);
                c
            })
            .collect();
        Self { seed, convs }
    }
}

impl FeatureEmbedder for RandomConvEmbedder {
    fn identifier(&self) -> String {
        format!("random-conv-v1-seed{}", self.seed)
    }

    fn dimension(&self) -> usize {
        RANDOM_CONV_WIDTHS[RANDOM_CONV_WIDTHS.len() - 1]
    }

    fn embed(&self, images: &[EmbedInput<'_>]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((images.len(), self.dimension()));
        let Some(first) = images.first() else {
            return Ok(out);
        };
        let (h, w) = first.pixels.dim();
        for (ci, chunk) in images.chunks(EMBED_CHUNK).enumerate() {
            let mut x = Array4::zeros((chunk.len(), 1, h, w));
            for (i, img) in chunk.iter().enumerate() {
                if img.pixels.dim() != (h, w) {
                    return Err(shape_mismatch((h, w), img.pixels.dim()));
                }
                x.slice_mut(s![i, 0, .., ..]).assign(&img.pixels.mapv(|v| 2.0 * v - 1.0));
            }
            for conv in &self.convs {
                x = conv.forward(&x)?.0;
                x.mapv_inplace(|v| v.max(0.0));
            }
            let pooled = x
                .mean_axis(Axis(3))
                .and_then(|a| a.mean_axis(Axis(2)))
                .expect("non-empty feature map");
            let start = ci * EMBED_CHUNK;
            out.slice_mut(s![start..start + chunk.len(), ..]).assign(&pooled);
        }
        Ok(out)
    }
}

/// Features computed elsewhere (e.g. by a pretrained network), looked up by key.
///
/// File format: `#` comments, optional `# id: <name>` header, then one
/// `key<TAB>v1,v2,...` line per image. All vectors must have the same length.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    pub id: String,
    dimension: usize,
    features: HashMap<String, Vec<f64>>,
}

impl PrecomputedEmbedder {
    pub fn parse(text: &str, default_id: &str) -> Result<Self> {
        let mut id = default_id.to_string();
        let mut features = HashMap::new();
        let mut dimension = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("id:") {
                    id = v.trim().to_string();
                }
                continue;
            }
            let bad = |reason: String| Error::MalformedRecord { line: i + 1, reason };
            let (key, vals) = line.split_once('\t').ok_or_else(|| bad("missing TAB separator".into()))?;
            let v = vals
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("bad feature value: {e}")))?;
            if *dimension.get_or_insert(v.len()) != v.len() {
                return Err(bad(format!("expected {} values, got {}", dimension.unwrap_or(0), v.len())));
            }
            features.insert(key.to_string(), v);
        }
        Ok(Self {
            id,
            dimension: dimension.ok_or(Error::EmptyDataset)?,
            features,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("precomputed");
        Self::parse(&std::fs::read_to_string(path)?, name)
    }
}

impl FeatureEmbedder for PrecomputedEmbedder {
    fn identifier(&self) -> String {
        self.id.clone()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, images: &[EmbedInput<'_>]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((images.len(), self.dimension));
        for (mut row, img) in out.rows_mut().into_iter().zip(images) {
            let v = self
                .features
                .get(img.key)
                .ok_or_else(|| Error::InvalidConfig(format!("no precomputed features for {}", img.key)))?;
            row.assign(&ArrayView1::from(&v[..]));
        }
        Ok(out)
    }
}

fn unit(v: ArrayView1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if n > 0.0 {
        v.mapv(|x| x / n)
    } else {
        v.to_owned()
    }
}

/// `‖u − v‖ / 2` for the unit-normalized feature vectors; lies in [0, 1].
pub fn perceptual_from_features(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let d = unit(u) - unit(v);
    d.dot(&d).sqrt() / 2.0
}

pub fn perceptual_distance<'a>(embedder: &dyn FeatureEmbedder, a: EmbedInput<'a>, b: EmbedInput<'a>) -> Result<f64> {
    let f = embedder.embed(&[a, b])?;
    Ok(perceptual_from_features(f.row(0), f.row(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((32, 32), |_| rng.gen())
    }

    #[test]
    fn random_conv_is_deterministic() {
        let a = random_image(1);
        let b = random_image(2);
        let inputs = [
            EmbedInput { key: "a", pixels: a.view() },
            EmbedInput { key: "b", pixels: b.view() },
        ];
        let e1 = RandomConvEmbedder::new(7).embed(&inputs).unwrap();
        let e2 = RandomConvEmbedder::new(7).embed(&inputs).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.dim(), (2, 32));
        assert_ne!(RandomConvEmbedder::new(8).embed(&inputs).unwrap(), e1);
    }

    #[test]
    fn perceptual_properties() {
        let emb = RandomConvEmbedder::new(0);
        let a = random_image(3);
        let b = random_image(4);
        let ia = EmbedInput { key: "a", pixels: a.view() };
        let ib = EmbedInput { key: "b", pixels: b.view() };
        assert_eq!(perceptual_distance(&emb, ia, ia).unwrap(), 0.0);
        let ab = perceptual_distance(&emb, ia, ib).unwrap();
        let ba = perceptual_distance(&emb, ib, ia).unwrap();
        assert!((ab - ba).abs() < 1e-7);
        assert!(ab > 0.0 && ab <= 1.0);
    }

    #[test]
    fn precomputed_lookup() {
        let e = PrecomputedEmbedder::parse("# id: inception\nreal/U+4E00\t1,2,3\ngenerated/U+4E00\t0,0,1\n", "x").unwrap();
        assert_eq!(e.identifier(), "inception");
        assert_eq!(e.dimension(), 3);
        let px = Array2::zeros((8, 8));
        let f = e
            .embed(&[EmbedInput {
                key: "generated/U+4E00",
                pixels: px.view(),
            }])
            .unwrap();
        assert_eq!(f.row(0).to_vec(), vec![0.0, 0.0, 1.0]);
        assert!(e.embed(&[EmbedInput { key: "nope", pixels: px.view() }]).is_err());
        assert!(PrecomputedEmbedder::parse("a\t1,2\nb\t1\n", "x").is_err());
    }
}

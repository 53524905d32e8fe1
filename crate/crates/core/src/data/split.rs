use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::glyph::glyph_list_from_manifest;
use crate::error::{Error, Result};
use crate::stroke::format_codepoint;

pub const TRAIN_FRACTION: f64 = 0.8;
pub const MIN_CHARACTERS: usize = 10;

/// Train/test partition of a font pair's shared characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<char>,
    pub test: Vec<char>,
    pub seed: u64,
}

/// Shuffles the (deduplicated, sorted) characters with `seed` and keeps
/// `round(0.8·N)` for training. Both halves are returned sorted.
pub fn make_split(codepoints: &[char], seed: u64) -> Result<DatasetSplit> {
    let mut chars: Vec<char> = codepoints.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if chars.len() < MIN_CHARACTERS {
        return Err(Error::TooFewCharacters {
            min: MIN_CHARACTERS,
            got: chars.len(),
        });
    }
    let n_train = (TRAIN_FRACTION * chars.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chars.shuffle(&mut rng);
    let mut train = chars[..n_train].to_vec();
    let mut test = chars[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit { train, test, seed })
}

impl DatasetSplit {
    /// Text manifest: `# seed: N` header, then `train<TAB>U+XXXX` / `test<TAB>U+XXXX` lines.
    pub fn to_manifest(&self) -> String {
        let mut out = format!("# split\n# seed: {}\n", self.seed);
        for c in &self.train {
            let _ = writeln!(out, "train\t{}", format_codepoint(*c));
        }
        for c in &self.test {
            let _ = writeln!(out, "test\t{}", format_codepoint(*c));
        }
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let (header, groups) = glyph_list_from_manifest(text, &["train", "test"])?;
        let seed = header
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedRecord {
                line: 0,
                reason: "split manifest lacks a seed header".into(),
            })?;
        let mut groups = groups.into_iter();
        Ok(Self {
            train: groups.next().unwrap_or_default(),
            test: groups.next().unwrap_or_default(),
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_manifest())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_manifest(&std::fs::read_to_string(path)?)
    }
}

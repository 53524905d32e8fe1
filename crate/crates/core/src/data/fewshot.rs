use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::glyph::{glyph_list_from_manifest, read_codepoint_list};
use super::split::DatasetSplit;
use crate::error::{Error, Result};
use crate::stroke::format_codepoint;

/// Absorbs float noise in `p·n` products that should be integral (0.29·100 = 28.999…).
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FewShotStrategy {
    /// Pair `floor(fraction·|train|)` training characters drawn uniformly.
    Random { fraction: f64 },
    /// Pair up to `k` characters drawn from the structural set listed in `set_path`.
    Deterministic { set_path: PathBuf, k: usize },
}

impl std::fmt::Display for FewShotStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FewShotStrategy::Random { fraction } => write!(f, "random({fraction})"),
            FewShotStrategy::Deterministic { set_path, k } => write!(f, "deterministic({}, {k})", set_path.display()),
        }
    }
}

impl std::str::FromStr for FewShotStrategy {
    type Err = Error;

    /// Accepts `random(0.2)` / `random:0.2` and `deterministic(path, 750)` / `deterministic:path:750`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unrecognized few-shot strategy {s:?}"));
        let s = s.trim();
        let (kind, args) = if let Some(open) = s.find('(') {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            (&s[..open], inner.split(',').map(str::trim).collect::<Vec<_>>())
        } else if let Some((kind, rest)) = s.split_once(':') {
            (kind, rest.rsplitn(2, ':').collect::<Vec<_>>().into_iter().rev().collect())
        } else {
            return Err(bad());
        };
        match (kind.trim(), args.as_slice()) {
            ("random", [p]) => Ok(FewShotStrategy::Random {
                fraction: p.parse().map_err(|_| bad())?,
            }),
            ("deterministic", [path, k]) => Ok(FewShotStrategy::Deterministic {
                set_path: PathBuf::from(path),
                k: k.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl serde::Serialize for FewShotStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FewShotStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which training characters carry a ground-truth target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotPlan {
    pub paired: BTreeSet<char>,
    pub unpaired: BTreeSet<char>,
    pub strategy: FewShotStrategy,
    pub seed: u64,
}

pub fn paired_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + FLOOR_SLACK).floor() as usize
}

pub fn make_fewshot_plan(split: &DatasetSplit, strategy: &FewShotStrategy, seed: u64) -> Result<FewShotPlan> {
    let train: BTreeSet<char> = split.train.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paired: BTreeSet<char> = match strategy {
        FewShotStrategy::Random { fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::PercentOutOfRange(*fraction));
            }
            let mut pool: Vec<char> = train.iter().copied().collect();
            pool.shuffle(&mut rng);
            pool.truncate(paired_count(*fraction, train.len()));
            pool.into_iter().collect()
        }
        FewShotStrategy::Deterministic { set_path, k } => {
            let set = load_structural_set(set_path)?;
            let mut seen = BTreeSet::new();
            let mut pool: Vec<char> = set.into_iter().filter(|c| train.contains(c) && seen.insert(*c)).collect();
            if *k < pool.len() {
                pool.shuffle(&mut rng);
                pool.truncate(*k);
            }
            pool.into_iter().collect()
        }
    };
    let unpaired = train.difference(&paired).copied().collect();
    Ok(FewShotPlan {
        paired,
        unpaired,
        strategy: strategy.clone(),
        seed,
    })
}

fn load_structural_set(path: &Path) -> Result<Vec<char>> {
    read_codepoint_list(path).map_err(|e| Error::StructuralSetUnavailable(format!("{}: {e}", path.display())))
}

impl FewShotPlan {
    pub fn len(&self) -> usize {
        self.paired.len() + self.unpaired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_paired(&self, c: char) -> bool {
        self.paired.contains(&c)
    }

    /// All training characters in ascending order.
    pub fn training_characters(&self) -> Vec<char> {
        self.paired.union(&self.unpaired).copied().collect()
    }

    pub fn to_manifest(&self) -> String {
        let mut out = format!("# few-shot plan\n# seed: {}\n# strategy: {}\n", self.seed, self.strategy);
        for c in &self.paired {
            let _ = writeln!(out, "paired\t{}", format_codepoint(*c));
        }
        for c in &self.unpaired {
            let _ = writeln!(out, "unpaired\t{}", format_codepoint(*c));
        }
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let (header, groups) = glyph_list_from_manifest(text, &["paired", "unpaired"])?;
        let missing = |k: &str| Error::MalformedRecord {
            line: 0,
            reason: format!("plan manifest lacks a {k} header"),
        };
        let seed = header.get("seed").and_then(|s| s.parse().ok()).ok_or_else(|| missing("seed"))?;
        let strategy = header.get("strategy").ok_or_else(|| missing("strategy"))?.parse()?;
        let mut groups = groups.into_iter();
        Ok(Self {
            paired: groups.next().unwrap_or_default().into_iter().collect(),
            unpaired: groups.next().unwrap_or_default().into_iter().collect(),
            strategy,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_manifest())?;
        Ok(())
    }
}

/// One training entry after copy augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedEntry {
    pub codepoint: char,
    /// True for the appended copies.
    pub duplicate: bool,
}

/// Appends copies of the first `floor(fraction·|train|)` entries. Every entry,
/// original or copy, is treated as unpaired.
pub fn copy_augment(train: &[char], fraction: f64) -> Vec<AugmentedEntry> {
    let fraction = fraction.clamp(0.0, 1.0);
    let extra = paired_count(fraction, train.len());
    train
        .iter()
        .map(|&c| AugmentedEntry {
            codepoint: c,
            duplicate: false,
        })
        .chain(train[..extra].iter().map(|&c| AugmentedEntry {
            codepoint: c,
            duplicate: true,
        }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(n: usize) -> DatasetSplit {
        DatasetSplit {
            train: (0..n).map(|i| char::from_u32(0x4E00 + i as u32).unwrap()).collect(),
            test: vec![],
            seed: 0,
        }
    }

    #[test]
    fn twenty_percent_counts() {
        let plan = make_fewshot_plan(&split(3004), &FewShotStrategy::Random { fraction: 0.2 }, 1).unwrap();
        assert_eq!(plan.paired.len(), 600);
        assert_eq!(plan.len(), 3004);
        let plan = make_fewshot_plan(&split(1588), &FewShotStrategy::Random { fraction: 0.2 }, 1).unwrap();
        assert_eq!(plan.paired.len(), 317);
    }

    #[test]
    fn zero_and_out_of_range() {
        let plan = make_fewshot_plan(&split(50), &FewShotStrategy::Random { fraction: 0.0 }, 1).unwrap();
        assert!(plan.paired.is_empty());
        assert_eq!(plan.unpaired.len(), 50);
        for p in [-0.1, 1.5, f64::NAN] {
            assert!(matches!(
                make_fewshot_plan(&split(50), &FewShotStrategy::Random { fraction: p }, 1),
                Err(Error::PercentOutOfRange(_))
            ));
        }
        assert_eq!(paired_count(0.29, 100), 29);
    }

    #[test]
    fn deterministic_strategy() {
        let dir = tempfile::tempdir().unwrap();
        let set = dir.path().join("structural.txt");
        // 30 listed characters, 20 of which are in the training set
        let listed: String = (10..40).map(|i| format!("U+{:04X}\n", 0x4E00 + i)).collect();
        std::fs::write(&set, listed).unwrap();
        let s = split(30);
        for (k, expect) in [(5, 5), (20, 20), (750, 20)] {
            let plan = make_fewshot_plan(&s, &FewShotStrategy::Deterministic { set_path: set.clone(), k }, 3).unwrap();
            assert_eq!(plan.paired.len(), expect);
            assert!(plan.paired.iter().all(|&c| (c as u32) >= 0x4E00 + 10));
            assert_eq!(plan.len(), 30);
        }
        let missing = FewShotStrategy::Deterministic {
            set_path: dir.path().join("absent.txt"),
            k: 10,
        };
        assert!(matches!(make_fewshot_plan(&s, &missing, 0), Err(Error::StructuralSetUnavailable(_))));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("random(0.2)".parse::<FewShotStrategy>().unwrap(), FewShotStrategy::Random { fraction: 0.2 });
        assert_eq!("random:0.1".parse::<FewShotStrategy>().unwrap(), FewShotStrategy::Random { fraction: 0.1 });
        assert_eq!(
            "deterministic(sets/s.txt, 250)".parse::<FewShotStrategy>().unwrap(),
            FewShotStrategy::Deterministic {
                set_path: "sets/s.txt".into(),
                k: 250
            }
        );
        assert_eq!(
            "deterministic:sets/s.txt:500".parse::<FewShotStrategy>().unwrap(),
            FewShotStrategy::Deterministic {
                set_path: "sets/s.txt".into(),
                k: 500
            }
        );
        assert!("uniform(0.2)".parse::<FewShotStrategy>().is_err());
    }

    #[test]
    fn plan_manifest_round_trip() {
        let plan = make_fewshot_plan(&split(40), &FewShotStrategy::Random { fraction: 0.25 }, 8).unwrap();
        assert_eq!(FewShotPlan::from_manifest(&plan.to_manifest()).unwrap(), plan);
    }

    #[test]
    fn copy_augment_sizes() {
        let train = split(3004).train;
        assert_eq!(copy_augment(&train, 1.0).len(), 6008);
        assert_eq!(copy_augment(&train, 0.2).len(), 3604);
        let none = copy_augment(&train, 0.0);
        assert_eq!(none.len(), 3004);
        assert!(none.iter().all(|e| !e.duplicate));
        assert!(none.iter().map(|e| e.codepoint).eq(train.iter().copied()));
    }
}

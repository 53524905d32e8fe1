//! Glyph images, corpus construction, splits, few-shot plans and batching.

pub mod batch;
pub mod fewshot;
pub mod glyph;
pub mod raster;
pub mod split;
pub mod synthetic;

pub use batch::{batch_iter, Batch, BatchSchedule, GlyphDataset, TrainEntry};
pub use fewshot::{copy_augment, make_fewshot_plan, paired_count, AugmentedEntry, FewShotPlan, FewShotStrategy};
pub use glyph::{load_font_dir, save_font_dir, GlyphImage};
pub use raster::{rasterize_font, RasterReport};
pub use split::{make_split, DatasetSplit};
pub use synthetic::{make_synthetic_font_pair, synthetic_stroke_table, synthetic_structural_set, SyntheticFontPair};

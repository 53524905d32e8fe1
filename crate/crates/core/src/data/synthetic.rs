//! Procedural pseudo-glyph corpora with exact ground-truth pairs.
//!
//! Each character is a handful of stroke primitives drawn into grid regions of the
//! canvas. The target "font" is a fixed transform of the source rendering: one-pixel
//! ink dilation followed by a horizontal shear, so every character has a pair.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::glyph::GlyphImage;
use crate::stroke::{StrokeTable, NUM_STROKE_TYPES};

pub const SOURCE_FONT: &str = "synthetic-source";
pub const TARGET_FONT: &str = "synthetic-target";
pub const FIRST_CODEPOINT: u32 = 0x4E00;
/// Horizontal displacement per row away from the center, in pixels per pixel.
pub const SHEAR: f64 = 0.2;
/// Size of the bundled structural-set stand-in.
pub const STRUCTURAL_SET_SIZE: usize = 60;

const TEMPLATE_SEED: u64 = 0x5354_524b;

#[derive(Debug, Clone)]
pub struct SyntheticFontPair {
    pub source: Vec<GlyphImage>,
    pub target: Vec<GlyphImage>,
    pub table: StrokeTable,
}

/// The 32 stroke primitives as polylines in the unit square. Fixed across seeds.
fn stroke_templates() -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let mut out: Vec<Vec<(f64, f64)>> = vec![
        vec![(0.1, 0.5), (0.9, 0.5)],
        vec![(0.5, 0.1), (0.5, 0.9)],
        vec![(0.75, 0.1), (0.2, 0.9)],
        vec![(0.2, 0.15), (0.9, 0.9)],
        vec![(0.4, 0.35), (0.6, 0.6)],
        vec![(0.15, 0.75), (0.85, 0.4)],
        vec![(0.1, 0.35), (0.85, 0.35), (0.7, 0.6)],
        vec![(0.5, 0.1), (0.5, 0.85), (0.3, 0.7)],
        vec![(0.1, 0.2), (0.8, 0.2), (0.8, 0.9)],
        vec![(0.25, 0.1), (0.25, 0.8), (0.9, 0.8)],
    ];
    while out.len() < NUM_STROKE_TYPES {
        let n = rng.gen_range(2..=4);
        out.push((0..n).map(|_| (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9))).collect());
    }
    out
}

/// Canvas regions a stroke may occupy: whole, halves, quadrants.
const REGIONS: [(f64, f64, f64, f64); 9] = [
    (0.0, 0.0, 1.0, 1.0),
    (0.0, 0.0, 1.0, 0.5),
    (0.0, 0.5, 1.0, 1.0),
    (0.0, 0.0, 0.5, 1.0),
    (0.5, 0.0, 1.0, 1.0),
    (0.0, 0.0, 0.5, 0.5),
    (0.5, 0.0, 1.0, 0.5),
    (0.0, 0.5, 0.5, 1.0),
    (0.5, 0.5, 1.0, 1.0),
];

#[derive(Debug, Clone)]
struct PlacedStroke {
    kind: u8,
    region: usize,
}

fn sample_characters(n_chars: usize, seed: u64) -> Vec<Vec<PlacedStroke>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_chars)
        .map(|_| {
            let count = rng.gen_range(2..=5);
            (0..count)
                .map(|_| PlacedStroke {
                    kind: rng.gen_range(1..=NUM_STROKE_TYPES as u8),
                    region: rng.gen_range(0..REGIONS.len()),
                })
                .collect()
        })
        .collect()
}

fn codepoint(i: usize) -> char {
    char::from_u32(FIRST_CODEPOINT + i as u32).expect("valid CJK codepoint")
}

/// Stroke table of the synthetic corpus alone (no rendering).
pub fn synthetic_stroke_table(n_chars: usize, seed: u64) -> StrokeTable {
    let chars = sample_characters(n_chars, seed);
    StrokeTable::from_entries(
        chars
            .iter()
            .enumerate()
            .map(|(i, strokes)| (codepoint(i), strokes.iter().map(|s| s.kind).collect())),
        format!("synthetic-n{n_chars}-seed{seed}"),
    )
    .expect("generated ids are in range")
}

/// Stand-in for a structural character set: repeated greedy covers of the 32 stroke
/// types over `table`, `n` characters in total (fewer if the table runs out).
pub fn synthetic_structural_set(table: &StrokeTable, n: usize) -> Vec<char> {
    let mut pool: Vec<(char, u32)> = table
        .characters()
        .map(|c| (c, table.encode(c).expect("listed character").mask()))
        .collect();
    let mut out = Vec::with_capacity(n.min(pool.len()));
    let mut covered = 0u32;
    while out.len() < n && !pool.is_empty() {
        let (best, _) = pool
            .iter()
            .enumerate()
            .max_by_key(|(i, (_, m))| ((m & !covered).count_ones(), std::cmp::Reverse(*i)))
            .expect("non-empty pool");
        let (c, m) = pool.remove(best);
        covered |= m;
        if covered == u32::MAX {
            covered = 0;
        }
        out.push(c);
    }
    out
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn render(strokes: &[PlacedStroke], templates: &[Vec<(f64, f64)>], resolution: usize) -> Array2<f32> {
    let res = resolution as f64;
    let half_width = (res / 40.0).max(0.75);
    let margin = 0.08;
    let mut segments = Vec::new();
    for s in strokes {
        let (x0, y0, x1, y1) = REGIONS[s.region];
        let map = |(u, v): (f64, f64)| {
            let x = x0 + margin + u * (x1 - x0 - 2.0 * margin);
            let y = y0 + margin + v * (y1 - y0 - 2.0 * margin);
            (x * res, y * res)
        };
        let pts: Vec<_> = templates[s.kind as usize - 1].iter().copied().map(map).collect();
        for w in pts.windows(2) {
            segments.push((w[0], w[1]));
        }
    }
    Array2::from_shape_fn((resolution, resolution), |(y, x)| {
        let p = (x as f64 + 0.5, y as f64 + 0.5);
        if segments.iter().any(|&(a, b)| segment_distance(p, a, b) <= half_width) {
            -1.0
        } else {
            1.0
        }
    })
}

/// Source → target transform: 3×3 ink dilation, then a shear about the center row.
pub fn target_transform(source: &Array2<f32>) -> Array2<f32> {
    let (h, w) = source.dim();
    let dilated = Array2::from_shape_fn((h, w), |(y, x)| {
        let mut v = 1.0f32;
        for yy in y.saturating_sub(1)..(y + 2).min(h) {
            for xx in x.saturating_sub(1)..(x + 2).min(w) {
                v = v.min(source[[yy, xx]]);
            }
        }
        v
    });
    let center = (h as f64 - 1.0) / 2.0;
    Array2::from_shape_fn((h, w), |(y, x)| {
        let sx = (x as f64 - SHEAR * (y as f64 - center)).round();
        if sx < 0.0 || sx >= w as f64 {
            1.0
        } else {
            dilated[[y, sx as usize]]
        }
    })
}

/// Generates `n_chars` source glyphs, their transformed targets and the stroke table.
pub fn make_synthetic_font_pair(n_chars: usize, seed: u64, resolution: usize) -> SyntheticFontPair {
    let templates = stroke_templates();
    let chars = sample_characters(n_chars, seed);
    let mut source = Vec::with_capacity(n_chars);
    let mut target = Vec::with_capacity(n_chars);
    for (i, strokes) in chars.iter().enumerate() {
        let c = codepoint(i);
        let pixels = render(strokes, &templates, resolution);
        target.push(GlyphImage::new(target_transform(&pixels), c, TARGET_FONT));
        source.push(GlyphImage::new(pixels, c, SOURCE_FONT));
    }
    SyntheticFontPair {
        source,
        target,
        table: synthetic_stroke_table(n_chars, seed),
    }
}

use std::path::Path;

use ab_glyph::{Font, FontVec, PxScale, ScaleFont};
use ndarray::Array2;

use super::glyph::GlyphImage;
use crate::error::{Error, Result};

/// Fraction of the canvas occupied by the em box.
const EM_FILL: f32 = 0.85;

#[derive(Debug, Clone)]
pub struct RasterReport {
    pub images: Vec<GlyphImage>,
    /// Requested characters the font has no (or an empty) outline for.
    pub missing: Vec<char>,
}

/// Renders each requested character centered on a `resolution²` canvas.
pub fn rasterize_font(font_file: &Path, font_id: &str, codepoints: &[char], resolution: usize) -> Result<RasterReport> {
    if resolution < 32 {
        return Err(Error::InvalidConfig(format!("resolution {resolution} < 32")));
    }
    let bytes = std::fs::read(font_file)
        .map_err(|e| Error::UnrenderableFont(format!("{}: {e}", font_file.display())))?;
    let font = FontVec::try_from_vec(bytes).map_err(|e| Error::UnrenderableFont(format!("{}: {e}", font_file.display())))?;
    let mut images = Vec::new();
    let mut missing = Vec::new();
    for &c in codepoints {
        match render_one(&font, c, resolution) {
            Some(pixels) => images.push(GlyphImage::new(pixels, c, font_id)),
            None => missing.push(c),
        }
    }
    if images.is_empty() {
        return Err(Error::EmptyGlyphSet);
    }
    Ok(RasterReport { images, missing })
}

fn render_one(font: &FontVec, c: char, resolution: usize) -> Option<Array2<f32>> {
    let id = font.glyph_id(c);
    if id.0 == 0 {
        return None;
    }
    let scale = PxScale::from(resolution as f32 * EM_FILL);
    let glyph = id.with_scale(scale);
    let outline = font.outline_glyph(glyph)?;
    let bounds = outline.px_bounds();
    let res = resolution as f32;
    // center the ink box; the outline is re-anchored at the computed offset
    let dx = ((res - bounds.width()) / 2.0).floor() - bounds.min.x;
    let dy = ((res - bounds.height()) / 2.0).floor() - bounds.min.y;
    let glyph = id.with_scale_and_position(scale, ab_glyph::point(dx, dy));
    let outline = font.as_scaled(scale).outline_glyph(glyph)?;
    let bounds = outline.px_bounds();
    let mut coverage = Array2::<f32>::zeros((resolution, resolution));
    outline.draw(|x, y, v| {
        let px = x as i64 + bounds.min.x as i64;
        let py = y as i64 + bounds.min.y as i64;
        if px >= 0 && py >= 0 && (px as usize) < resolution && (py as usize) < resolution {
            let cell = &mut coverage[[py as usize, px as usize]];
            *cell = (*cell + v).min(1.0);
        }
    });
    if coverage.iter().all(|&v| v == 0.0) {
        return None;
    }
    Some(coverage.mapv(|v| 1.0 - 2.0 * v))
}

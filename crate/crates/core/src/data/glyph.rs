use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use ndarray::Array2;

use crate::error::{shape_mismatch, Error, Result};
use crate::stroke::{format_codepoint, parse_codepoint};

/// One character rendered in one font. Pixels are in [-1, 1]: -1 is ink, 1 is paper.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphImage {
    pub pixels: Array2<f32>,
    pub codepoint: char,
    pub font_id: String,
}

/// 8-bit gray level to the [-1, 1] training range.
pub fn byte_to_unit(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

pub fn unit_to_byte(v: f32) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

impl GlyphImage {
    pub fn new(pixels: Array2<f32>, codepoint: char, font_id: impl Into<String>) -> Self {
        Self {
            pixels,
            codepoint,
            font_id: font_id.into(),
        }
    }

    pub fn resolution(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn in_range(&self) -> bool {
        self.pixels.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn to_gray(&self) -> GrayImage {
        let (h, w) = self.pixels.dim();
        GrayImage::from_fn(w as u32, h as u32, |x, y| Luma([unit_to_byte(self.pixels[[y as usize, x as usize]])]))
    }

    pub fn from_gray(img: &GrayImage, codepoint: char, font_id: &str) -> Self {
        let (w, h) = img.dimensions();
        let pixels = Array2::from_shape_fn((h as usize, w as usize), |(y, x)| byte_to_unit(img.get_pixel(x as u32, y as u32)[0]));
        Self::new(pixels, codepoint, font_id)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_gray().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>, codepoint: char, font_id: &str) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path)?.to_luma8();
        Ok(Self::from_gray(&img, codepoint, font_id))
    }
}

/// `<root>/<font_id>/U+XXXX.png`.
pub fn glyph_path(root: &Path, font_id: &str, c: char) -> PathBuf {
    root.join(font_id).join(format!("{}.png", format_codepoint(c)))
}

pub fn save_font_dir(root: &Path, images: &[GlyphImage]) -> Result<()> {
    for img in images {
        let path = glyph_path(root, &img.font_id, img.codepoint);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        img.save_png(path)?;
    }
    Ok(())
}

/// Loads every `U+XXXX.png` of one font directory, keyed by character.
/// Images whose size differs from `resolution` are rejected.
pub fn load_font_dir(root: &Path, font_id: &str, resolution: usize) -> Result<BTreeMap<char, GlyphImage>> {
    let dir = root.join(font_id);
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir));
    }
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(c) = parse_codepoint(stem) else {
            continue;
        };
        let img = GlyphImage::load_png(&path, c, font_id)?;
        if img.pixels.dim() != (resolution, resolution) {
            return Err(shape_mismatch((resolution, resolution), (path.display().to_string(), img.pixels.dim())));
        }
        out.insert(c, img);
    }
    Ok(out)
}

/// Reads a codepoint list: one `U+XXXX` per line, `#` comments and blank lines ignored.
pub fn read_codepoint_list(path: &Path) -> Result<Vec<char>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_codepoint_list(&text)
}

pub fn parse_codepoint_list(text: &str) -> Result<Vec<char>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_codepoint(line).ok_or_else(|| Error::MalformedRecord {
            line: i + 1,
            reason: format!("bad codepoint {line:?}"),
        })?);
    }
    Ok(out)
}

pub fn write_codepoint_list(path: &Path, chars: &[char]) -> Result<()> {
    let mut text = String::new();
    for c in chars {
        text.push_str(&format_codepoint(*c));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses a partition manifest: `# key: value` header lines and `label<TAB>U+XXXX`
/// records. Returns the header map and one list per requested label, in file order.
pub fn glyph_list_from_manifest(text: &str, labels: &[&str]) -> Result<(BTreeMap<String, String>, Vec<Vec<char>>)> {
    let mut header = BTreeMap::new();
    let mut groups = vec![Vec::new(); labels.len()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line: i + 1, reason };
        let (label, cp) = line
            .split_once('\t')
            .ok_or_else(|| malformed("missing TAB separator".into()))?;
        let slot = labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| malformed(format!("unknown partition {label:?}")))?;
        groups[slot].push(parse_codepoint(cp).ok_or_else(|| malformed(format!("bad codepoint {cp:?}")))?);
    }
    Ok((header, groups))
}

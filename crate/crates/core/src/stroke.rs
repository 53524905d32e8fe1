//! Stroke decomposition tables and 32-bit one-hot-per-type stroke encodings.
//!
//! Table file grammar (UTF-8, `\n` or `\r\n` line endings):
//!
//! ```text
//! file      = { line }
//! line      = comment | blank | record
//! comment   = "#" { any } ; "# version: <text>" sets the table version
//! blank     = ""
//! record    = codepoint TAB id { "," id }
//! codepoint = "U+" 4*6 HEXDIGIT          ; uppercase A-F
//! id        = decimal integer in 1..=32, no sign, no leading zeros
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const NUM_STROKE_TYPES: usize = 32;

/// The bundled synthetic table used by tests and the smoke harness.
pub const SAMPLE_TABLE: &str = include_str!("../data/sample_strokes.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrokeTable {
    entries: BTreeMap<char, Vec<u8>>,
    pub source_path: String,
    pub version: String,
}

/// Presence bits over the 32 basic stroke types. Bit `i` is stroke type `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StrokeEncoding(u32);

impl StrokeEncoding {
    pub fn from_mask(mask: u32) -> Self {
        Self(mask)
    }

    /// Builds an encoding from 0/1 components; anything else is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() != NUM_STROKE_TYPES {
            return Err(Error::InvalidEncoding(format!("length {}", bits.len())));
        }
        let mut mask = 0u32;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << i,
                other => return Err(Error::InvalidEncoding(format!("component {i} = {other}"))),
            }
        }
        Ok(Self(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn bit(self, index: usize) -> bool {
        index < NUM_STROKE_TYPES && self.0 >> index & 1 == 1
    }

    pub fn bits(self) -> [u8; NUM_STROKE_TYPES] {
        std::array::from_fn(|i| (self.0 >> i & 1) as u8)
    }

    pub fn popcount(self) -> u32 {
        self.0.count_ones()
    }

    pub fn to_vector<T: Scalar>(self) -> [T; NUM_STROKE_TYPES] {
        std::array::from_fn(|i| if self.bit(i) { T::one() } else { T::zero() })
    }
}

impl std::fmt::Display for StrokeEncoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            f.write_char(if b == 1 { '1' } else { '0' })?;
        }
        Ok(())
    }
}

pub fn format_codepoint(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

/// Parses `U+XXXX` (4 to 6 uppercase hex digits) into a scalar value.
pub fn parse_codepoint(s: &str) -> Option<char> {
    let hex = s.strip_prefix("U+")?;
    if !(4..=6).contains(&hex.len())
        || !hex.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b))
    {
        return None;
    }
    char::from_u32(u32::from_str_radix(hex, 16).ok()?)
}

fn parse_stroke_id(s: &str, line: usize) -> Result<u8> {
    let malformed = || Error::MalformedRecord {
        line,
        reason: format!("bad stroke id {s:?}"),
    };
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        // "0" alone is well-formed but out of range, checked below
        return Err(malformed());
    }
    let v: u64 = s.parse().map_err(|_| Error::StrokeIdOutOfRange(line))?;
    if !(1..=NUM_STROKE_TYPES as u64).contains(&v) {
        return Err(Error::StrokeIdOutOfRange(line));
    }
    Ok(v as u8)
}

impl StrokeTable {
    /// Builds a table from in-memory entries, enforcing the same invariants as the loader.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (char, Vec<u8>)>,
        version: impl Into<String>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, (c, strokes)) in entries.into_iter().enumerate() {
            let line = i + 1;
            if strokes.is_empty() {
                return Err(Error::MalformedRecord {
                    line,
                    reason: "empty stroke list".into(),
                });
            }
            if strokes.iter().any(|&s| s == 0 || s as usize > NUM_STROKE_TYPES) {
                return Err(Error::StrokeIdOutOfRange(line));
            }
            if map.insert(c, strokes).is_some() {
                return Err(Error::DuplicateCodepoint(line));
            }
        }
        Ok(Self {
            entries: map,
            source_path: String::new(),
            version: version.into(),
        })
    }

    pub fn parse(text: &str, source_path: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut version = String::new();
        for (idx, raw) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim_start().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            let (cp, ids) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: "missing TAB separator".into(),
            })?;
            let c = parse_codepoint(cp).ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: format!("bad codepoint {cp:?}"),
            })?;
            let strokes = ids
                .split(',')
                .map(|s| parse_stroke_id(s, line_no))
                .collect::<Result<Vec<_>>>()?;
            if entries.insert(c, strokes).is_some() {
                return Err(Error::DuplicateCodepoint(line_no));
            }
        }
        Ok(Self {
            entries,
            source_path: source_path.to_string(),
            version,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: format!("not UTF-8: {e}"),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn sample() -> Self {
        Self::parse(SAMPLE_TABLE, "<bundled sample>").expect("bundled sample table is valid")
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        if !self.version.is_empty() {
            let _ = writeln!(out, "# version: {}", self.version);
        }
        for (c, strokes) in &self.entries {
            let ids: Vec<String> = strokes.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{}\t{}", format_codepoint(*c), ids.join(","));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn strokes(&self, c: char) -> Option<&[u8]> {
        self.entries.get(&c).map(Vec::as_slice)
    }

    pub fn characters(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (char, &[u8])> {
        self.entries.iter().map(|(c, s)| (*c, s.as_slice()))
    }

    /// Maps a character to its one-bit encoding; stroke multiplicity and order are discarded.
    pub fn encode(&self, c: char) -> Result<StrokeEncoding> {
        let strokes = self.entries.get(&c).ok_or(Error::UnknownCharacter(c))?;
        // file ids are 1-based, bit positions 0-based
        let mask = strokes.iter().fold(0u32, |m, &id| m | 1 << (id - 1));
        Ok(StrokeEncoding(mask))
    }

    /// Groups of two or more characters whose encodings coincide, ordered by first member.
    pub fn encoding_collisions(&self) -> Vec<Vec<char>> {
        let mut by_code: HashMap<StrokeEncoding, Vec<char>> = HashMap::new();
        for c in self.entries.keys() {
            let enc = self.encode(*c).expect("key present");
            by_code.entry(enc).or_default().push(*c);
        }
        let mut groups: Vec<Vec<char>> = by_code.into_values().filter(|g| g.len() >= 2).collect();
        groups.sort();
        groups
    }
}

/// Free-function form of [`StrokeTable::encode`].
pub fn encode_character(table: &StrokeTable, c: char) -> Result<StrokeEncoding> {
    table.encode(c)
}

pub fn encoding_collisions(table: &StrokeTable) -> Vec<Vec<char>> {
    table.encoding_collisions()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let t = StrokeTable::parse("U+4E00\t1\n", "mem").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.strokes('\u{4E00}'), Some(&[1u8][..]));
    }

    #[test]
    fn rejects_id_33() {
        let err = StrokeTable::parse("# c\nU+4E00\t1,33\n", "mem").unwrap_err();
        assert!(matches!(err, Error::StrokeIdOutOfRange(2)), "{err:?}");
        let err = StrokeTable::parse("U+4E00\t0\n", "mem").unwrap_err();
        assert!(matches!(err, Error::StrokeIdOutOfRange(1)), "{err:?}");
    }

    #[test]
    fn rejects_malformed_and_duplicates() {
        for bad in ["U+4E00 1", "U+4e00\t1", "4E00\t1", "U+4E00\t", "U+4E00\t1,,2", "U+4E00\t01", "U+4E00\t+1"] {
            let err = StrokeTable::parse(bad, "mem").unwrap_err();
            assert!(matches!(err, Error::MalformedRecord { line: 1, .. }), "{bad:?}: {err:?}");
        }
        let err = StrokeTable::parse("U+4E00\t1\nU+4E01\t2\nU+4E00\t3\n", "mem").unwrap_err();
        assert!(matches!(err, Error::DuplicateCodepoint(3)));
    }

    #[test]
    fn missing_file() {
        let err = StrokeTable::load("/nonexistent/strokes.txt").unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn multiplicity_discarded() {
        let t = StrokeTable::parse("U+4E00\t1,1,5,24\nU+4E01\t7\n", "mem").unwrap();
        let e = t.encode('\u{4E00}').unwrap();
        assert_eq!(e.popcount(), 3);
        let set: Vec<usize> = (0..32).filter(|&i| e.bit(i)).map(|i| i + 1).collect();
        assert_eq!(set, vec![1, 5, 24]);
        let unit = t.encode('\u{4E01}').unwrap();
        assert_eq!(unit.mask(), 1 << 6);
        assert!(matches!(t.encode('x'), Err(Error::UnknownCharacter('x'))));
    }

    #[test]
    fn collisions() {
        let t = StrokeTable::parse("U+4E00\t1,2\nU+4E01\t2,1,1\nU+4E02\t3\n", "mem").unwrap();
        assert_eq!(t.encoding_collisions(), vec![vec!['\u{4E00}', '\u{4E01}']]);
        let t = StrokeTable::parse("U+4E00\t1\nU+4E01\t2\n", "mem").unwrap();
        assert!(t.encoding_collisions().is_empty());
    }

    #[test]
    fn version_and_crlf() {
        let t = StrokeTable::parse("# version: demo-1\r\nU+4E00\t3,2\r\n\r\n", "mem").unwrap();
        assert_eq!(t.version, "demo-1");
        assert_eq!(t.strokes('\u{4E00}'), Some(&[3u8, 2][..]));
    }

    #[test]
    fn from_bits_validates() {
        assert!(StrokeEncoding::from_bits(&[0; 31]).is_err());
        let mut bits = [0u8; 32];
        bits[4] = 2;
        assert!(StrokeEncoding::from_bits(&bits).is_err());
        bits[4] = 1;
        assert_eq!(StrokeEncoding::from_bits(&bits).unwrap().mask(), 1 << 4);
    }

    #[test]
    fn bundled_sample_is_valid() {
        let t = StrokeTable::sample();
        assert!(t.len() >= 200);
        for c in t.characters() {
            assert!(t.encode(c).unwrap().popcount() >= 1);
        }
    }
}

//! Page images, engine output parsing, and glyph extraction.
//!
//! The interchange format is a tab-separated file with one `word` row per
//! recognized word followed by one `symbol` row per character box. Word rows
//! carry the confidence; symbol rows carry the per-character label.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const OCR_TSV_HEADER: &str = "level\tpage\tword_id\tchar_index\tleft\ttop\tright\tbottom\tconf\ttext";

/// 8-bit grayscale raster. `right`/`bottom` of all boxes are exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize);
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn contains_box(&self, bbox: &BBox) -> bool {
        bbox.right <= self.width && bbox.bottom <= self.height
    }

    /// Pixel-exact crop; caller must ensure the box is in bounds.
    pub fn crop(&self, bbox: &BBox) -> GrayImage {
        assert!(self.contains_box(bbox), "crop box out of bounds");
        let (w, h) = (bbox.width(), bbox.height());
        let mut pixels = Vec::with_capacity(w as usize * h as usize);
        for y in bbox.top..bbox.bottom {
            let row = y as usize * self.width as usize;
            pixels.extend_from_slice(
                &self.pixels[row + bbox.left as usize..row + bbox.right as usize],
            );
        }
        GrayImage::from_pixels(w, h, pixels)
    }

    /// Serializes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Loads a PGM (P5, maxval 255) or an 8-bit grayscale PNG, sniffing the
/// format from the file's magic bytes. Color or higher-depth inputs are
/// rejected rather than converted.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        return parse_pgm(&bytes, path);
    }
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::ImageFormat {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        return match decoded {
            image::DynamicImage::ImageLuma8(buf) => Ok(GrayImage::from_pixels(
                buf.width(),
                buf.height(),
                buf.into_raw(),
            )),
            other => Err(Error::ImageFormat {
                path: path.to_path_buf(),
                message: format!(
                    "PNG must be 8-bit grayscale, got {:?}",
                    other.color()
                ),
            }),
        };
    }
    Err(Error::ImageFormat {
        path: path.to_path_buf(),
        message: "expected PGM (P5) or PNG magic bytes".to_string(),
    })
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let bad = |message: &str| Error::ImageFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    // Header: "P5", width, height, maxval as whitespace-separated tokens,
    // with `#` comments allowed, then a single whitespace byte before data.
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("malformed PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| bad("malformed PGM header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad("PGM maxval must be 255"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing whitespace after PGM header"));
    }
    pos += 1;
    let expected = width as usize * height as usize;
    if bytes.len() < pos + expected {
        return Err(bad("PGM pixel data truncated"));
    }
    Ok(GrayImage::from_pixels(
        width,
        height,
        bytes[pos..pos + expected].to_vec(),
    ))
}

/// Pixel box; `right` and `bottom` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BBox {
    pub fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        assert!(left < right && top < bottom, "degenerate box");
        BBox {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> u32 {
        self.right - self.left
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharBox {
    pub label: char,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcrWord {
    pub word_id: u32,
    pub page: u32,
    pub bbox: BBox,
    pub text: String,
    /// Engine confidence in [0, 100]; out-of-range inputs are clamped.
    pub confidence: f64,
    pub chars: Vec<CharBox>,
    /// Set when the concatenated symbol labels disagree with `text`.
    pub segmentation_inconsistent: bool,
}

impl OcrWord {
    fn finish(mut self) -> Self {
        let joined: String = self.chars.iter().map(|c| c.label).collect();
        self.segmentation_inconsistent = joined != self.text;
        self
    }
}

/// Parses the interchange TSV. Structural problems (wrong column count,
/// unparseable numbers, symbols without a word, degenerate boxes) are hard
/// errors naming the line; text/symbol disagreements only flag the word.
pub fn parse_ocr_tsv(text: &str, origin: &Path) -> Result<Vec<OcrWord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == OCR_TSV_HEADER => {}
        _ => {
            return Err(Error::parse(origin, 1, format!("expected header `{OCR_TSV_HEADER}`")));
        }
    }

    let mut words: Vec<OcrWord> = Vec::new();
    let mut current: Option<OcrWord> = None;
    let mut seen_ids = BTreeSet::new();

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 10 tab-separated fields, got {}", fields.len()),
            ));
        }
        let bad = |msg: String| Error::parse(origin, line_no, msg);
        let parse_u32 = |s: &str, name: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| bad(format!("invalid {name} value `{s}`")))
        };
        let page = parse_u32(fields[1], "page")?;
        let word_id = parse_u32(fields[2], "word_id")?;
        let char_index: i64 = fields[3]
            .parse()
            .map_err(|_| bad(format!("invalid char_index value `{}`", fields[3])))?;
        let left = parse_u32(fields[4], "left")?;
        let top = parse_u32(fields[5], "top")?;
        let right = parse_u32(fields[6], "right")?;
        let bottom = parse_u32(fields[7], "bottom")?;
        if left >= right || top >= bottom {
            return Err(bad(format!(
                "degenerate box {left},{top},{right},{bottom}"
            )));
        }
        let bbox = BBox {
            left,
            top,
            right,
            bottom,
        };

        match fields[0] {
            "word" => {
                if char_index != -1 {
                    return Err(bad("word rows must have char_index -1".to_string()));
                }
                if !seen_ids.insert(word_id) {
                    return Err(bad(format!("duplicate word_id {word_id}")));
                }
                let mut confidence: f64 = fields[8]
                    .parse()
                    .map_err(|_| bad(format!("invalid conf value `{}`", fields[8])))?;
                if !confidence.is_finite() {
                    return Err(bad(format!("invalid conf value `{}`", fields[8])));
                }
                if !(0.0..=100.0).contains(&confidence) {
                    log::warn!(
                        "{}:{line_no}: confidence {confidence} outside [0,100], clamping",
                        origin.display()
                    );
                    confidence = confidence.clamp(0.0, 100.0);
                }
                if fields[9].is_empty() {
                    return Err(bad("word row with empty text".to_string()));
                }
                if let Some(word) = current.take() {
                    words.push(word.finish());
                }
                current = Some(OcrWord {
                    word_id,
                    page,
                    bbox,
                    text: fields[9].to_string(),
                    confidence,
                    chars: Vec::new(),
                    segmentation_inconsistent: false,
                });
            }
            "symbol" => {
                let word = current
                    .as_mut()
                    .ok_or_else(|| bad("symbol row before any word row".to_string()))?;
                if word.word_id != word_id {
                    return Err(bad(format!(
                        "symbol row word_id {word_id} does not match open word {}",
                        word.word_id
                    )));
                }
                if char_index != word.chars.len() as i64 {
                    return Err(bad(format!(
                        "symbol rows out of order: expected char_index {}, got {char_index}",
                        word.chars.len()
                    )));
                }
                let mut chars = fields[9].chars();
                let label = match (chars.next(), chars.next()) {
                    (Some(c), None) => c,
                    _ => return Err(bad("symbol text must be a single character".to_string())),
                };
                word.chars.push(CharBox { label, bbox });
            }
            other => {
                return Err(bad(format!("unknown level `{other}`")));
            }
        }
    }
    if let Some(word) = current.take() {
        words.push(word.finish());
    }
    Ok(words)
}

pub fn read_ocr_tsv(path: &Path) -> Result<Vec<OcrWord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ocr_tsv(&text, path)
}

/// Canonical serialization; `parse_ocr_tsv` of the output reproduces the
/// input words and re-serializing reproduces the bytes.
pub fn serialize_ocr_tsv(words: &[OcrWord]) -> String {
    let mut out = String::from(OCR_TSV_HEADER);
    out.push('\n');
    for w in words {
        writeln!(
            out,
            "word\t{}\t{}\t-1\t{}\t{}\t{}\t{}\t{}\t{}",
            w.page, w.word_id, w.bbox.left, w.bbox.top, w.bbox.right, w.bbox.bottom,
            w.confidence, w.text
        )
        .unwrap();
        for (i, c) in w.chars.iter().enumerate() {
            writeln!(
                out,
                "symbol\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t-1\t{}",
                w.page, w.word_id, i, c.bbox.left, c.bbox.top, c.bbox.right, c.bbox.bottom,
                c.label
            )
            .unwrap();
        }
    }
    out
}

/// One character occurrence cut out of the page.
#[derive(Debug, Clone)]
pub struct GlyphRef {
    /// Stable id: the glyph's position in the document's (word, char)
    /// enumeration. Skipped glyphs still consume an id.
    pub glyph_id: u32,
    pub word_id: u32,
    pub char_index: u32,
    pub label: char,
    pub bbox: BBox,
    pub patch: GrayImage,
}

#[derive(Debug, Clone)]
pub struct SkippedGlyph {
    pub glyph_id: u32,
    pub word_id: u32,
    pub char_index: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct GlyphExtraction {
    pub glyphs: Vec<GlyphRef>,
    pub skipped: Vec<SkippedGlyph>,
    /// Words that lost at least one glyph to a skip.
    pub flagged_words: BTreeSet<u32>,
}

/// Crops every character box out of the page. Out-of-bounds boxes are
/// recorded and skipped rather than failing the whole document.
pub fn extract_glyphs(image: &GrayImage, words: &[OcrWord]) -> GlyphExtraction {
    let mut extraction = GlyphExtraction::default();
    let mut glyph_id = 0u32;
    for word in words {
        for (char_index, c) in word.chars.iter().enumerate() {
            if image.contains_box(&c.bbox) {
                extraction.glyphs.push(GlyphRef {
                    glyph_id,
                    word_id: word.word_id,
                    char_index: char_index as u32,
                    label: c.label,
                    bbox: c.bbox,
                    patch: image.crop(&c.bbox),
                });
            } else {
                extraction.skipped.push(SkippedGlyph {
                    glyph_id,
                    word_id: word.word_id,
                    char_index: char_index as u32,
                    reason: format!(
                        "box {},{},{},{} exceeds {}x{} image",
                        c.bbox.left, c.bbox.top, c.bbox.right, c.bbox.bottom,
                        image.width(), image.height()
                    ),
                });
                extraction.flagged_words.insert(word.word_id);
            }
            glyph_id += 1;
        }
    }
    extraction
}

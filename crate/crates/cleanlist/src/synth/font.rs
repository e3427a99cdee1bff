//! Procedural stroke letterforms on a fixed cell.
//!
//! The shapes are deliberately unrealistic in one specific way: classes
//! that the default confusion table treats as interchangeable (the o/c/e
//! ring family and the h/n/u arch family) are drawn as near-twins, while
//! every other pair is pushed apart with distinctive structure. Under
//! pixel noise the simulated recognizer then makes almost all of its
//! mistakes inside the confusion table, which is the regime the rest of
//! the system is built for.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::GrayImage;

pub const CELL_W: u32 = 16;
pub const CELL_H: u32 = 24;
pub const INK: u8 = 0;
pub const BG: u8 = 255;

struct Canvas {
    px: Vec<u8>,
}

impl Canvas {
    fn new() -> Canvas {
        Canvas {
            px: vec![BG; (CELL_W * CELL_H) as usize],
        }
    }

    fn rect(&mut self, x0: u32, x1: u32, y0: u32, y1: u32) {
        debug_assert!(x0 < x1 && x1 <= CELL_W && y0 < y1 && y1 <= CELL_H);
        for y in y0..y1 {
            for x in x0..x1 {
                self.px[(y * CELL_W + x) as usize] = INK;
            }
        }
    }

    /// Straight stroke of ~2px width between two points, painted as a
    /// run of small squares so the result is deterministic integer ink.
    fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as u32 * 2).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let cx = x0 + (x1 - x0) * t;
            let cy = y0 + (y1 - y0) * t;
            let xa = (cx - 1.0).ceil().max(0.0) as u32;
            let ya = (cy - 1.0).ceil().max(0.0) as u32;
            let xb = ((cx + 1.0).floor() as u32 + 1).min(CELL_W);
            let yb = ((cy + 1.0).floor() as u32 + 1).min(CELL_H);
            for y in ya..yb.max(ya) {
                for x in xa..xb.max(xa) {
                    self.px[(y * CELL_W + x) as usize] = INK;
                }
            }
        }
    }
}

/// Layout constants shared by the letterforms: x-height band rows 8..20,
/// ascenders rise to row 2, descenders reach row 23. The ring family uses
/// a narrow body (right stem at columns 9..11), the arch family a wide
/// one (columns 12..14), so the two families stay apart.
fn draw(label: char) -> Vec<u8> {
    let mut cv = Canvas::new();
    match label {
        // Ring family: o is the closed form, c opens the right side, e is
        // the open form plus a middle bar.
        'o' => {
            cv.rect(3, 11, 8, 10);
            cv.rect(3, 11, 18, 20);
            cv.rect(2, 4, 8, 20);
            cv.rect(9, 11, 8, 20);
        }
        'c' => {
            cv.rect(3, 11, 8, 10);
            cv.rect(3, 11, 18, 20);
            cv.rect(2, 4, 8, 20);
            cv.rect(9, 11, 8, 11);
            cv.rect(9, 11, 17, 20);
        }
        'e' => {
            cv.rect(3, 11, 8, 10);
            cv.rect(3, 11, 18, 20);
            cv.rect(2, 4, 8, 20);
            cv.rect(9, 11, 8, 11);
            cv.rect(9, 11, 17, 20);
            cv.rect(4, 9, 13, 15);
        }
        // Arch family: n is the base form, h extends the left stem into an
        // ascender, u mirrors the bar to the bottom. The small serifs are
        // shared across the family so its members stay each other's
        // nearest neighbors.
        'n' => {
            cv.rect(2, 4, 8, 20);
            cv.rect(3, 13, 8, 10);
            cv.rect(12, 14, 8, 20);
            cv.rect(3, 7, 18, 20);
        }
        'h' => {
            cv.rect(2, 4, 2, 20);
            cv.rect(3, 13, 8, 10);
            cv.rect(12, 14, 8, 20);
        }
        'u' => {
            cv.rect(2, 4, 8, 20);
            cv.rect(3, 13, 18, 20);
            cv.rect(12, 14, 8, 20);
            cv.rect(3, 7, 8, 10);
        }
        // Everything below is drawn for separation, not typographic
        // fidelity: bowls become triangles or mirrored strokes wherever a
        // faithful form would crowd a neighbor outside the table.
        'a' => {
            cv.line(7.5, 8.5, 3.0, 19.0);
            cv.line(8.5, 8.5, 13.0, 19.0);
            cv.rect(5, 11, 14, 16);
        }
        'b' => {
            cv.rect(2, 4, 2, 20);
            cv.rect(4, 13, 11, 13);
            cv.line(12.5, 12.5, 5.0, 19.5);
        }
        'd' => {
            cv.rect(4, 12, 2, 4);
            cv.rect(10, 12, 2, 20);
            cv.rect(6, 14, 10, 12);
        }
        'f' => {
            cv.rect(4, 12, 2, 4);
            cv.rect(4, 6, 2, 20);
            cv.rect(2, 10, 10, 12);
        }
        'g' => {
            cv.rect(3, 7, 9, 11);
            cv.rect(2, 4, 9, 16);
            cv.rect(3, 11, 14, 16);
            cv.rect(8, 10, 9, 22);
            cv.rect(3, 10, 20, 22);
        }
        'i' => {
            cv.rect(3, 6, 10, 20);
            cv.rect(3, 8, 4, 8);
        }
        'j' => {
            cv.rect(10, 12, 9, 23);
            cv.rect(2, 12, 21, 23);
        }
        'k' => {
            cv.rect(2, 4, 2, 20);
            cv.line(12.0, 8.5, 4.5, 13.0);
            cv.line(4.5, 14.0, 12.5, 19.0);
        }
        'l' => {
            cv.rect(7, 11, 2, 20);
            cv.rect(4, 11, 2, 4);
        }
        'm' => {
            cv.line(2.5, 19.0, 5.0, 9.5);
            cv.line(5.0, 9.5, 7.5, 19.0);
            cv.line(8.5, 19.0, 11.0, 9.5);
            cv.line(11.0, 9.5, 13.5, 19.0);
        }
        'p' => {
            cv.rect(2, 4, 8, 23);
            cv.rect(2, 8, 21, 23);
            cv.line(3.5, 8.5, 12.0, 11.5);
            cv.line(12.0, 11.5, 3.5, 14.5);
        }
        'q' => {
            cv.rect(3, 11, 12, 14);
            cv.rect(3, 11, 18, 20);
            cv.rect(2, 4, 12, 20);
            cv.rect(9, 11, 12, 20);
            cv.line(9.5, 18.5, 12.5, 22.5);
        }
        'r' => {
            cv.rect(2, 4, 8, 20);
            cv.rect(4, 8, 8, 10);
            cv.rect(10, 13, 11, 14);
        }
        's' => {
            cv.rect(5, 14, 8, 10);
            cv.line(12.0, 10.0, 4.5, 13.5);
            cv.line(4.5, 14.5, 12.0, 18.0);
            cv.rect(2, 11, 18, 20);
        }
        't' => {
            cv.rect(6, 8, 3, 20);
            cv.rect(2, 12, 8, 10);
            cv.rect(8, 13, 18, 20);
        }
        'v' => {
            cv.line(3.0, 8.5, 7.5, 18.0);
            cv.line(12.5, 8.5, 8.0, 18.0);
        }
        'w' => {
            cv.line(2.5, 8.5, 5.0, 18.0);
            cv.line(7.5, 8.5, 5.0, 18.0);
            cv.line(8.5, 8.5, 11.0, 18.0);
            cv.line(13.5, 8.5, 11.0, 18.0);
        }
        'x' => {
            cv.line(3.5, 8.5, 12.5, 19.0);
            cv.line(12.5, 8.5, 3.5, 19.0);
        }
        'y' => {
            cv.line(4.0, 8.5, 7.5, 14.0);
            cv.line(12.0, 8.5, 8.5, 14.0);
            cv.rect(7, 9, 14, 23);
            cv.rect(3, 9, 21, 23);
        }
        'z' => {
            cv.rect(3, 13, 8, 10);
            cv.line(11.5, 10.5, 4.0, 17.5);
            cv.rect(3, 13, 18, 20);
        }
        other => panic!("no letterform for {other:?}"),
    }
    cv.px
}

/// Fixed-cell prototype font plus the spacing used to lay out pages.
#[derive(Debug, Clone)]
pub struct SynthFont {
    glyphs: BTreeMap<char, Vec<u8>>,
    pub char_gap: u32,
    pub word_gap: u32,
    pub line_gap: u32,
    pub margin: u32,
}

impl SynthFont {
    /// The standard a-z font. Prototypes are pairwise distinct by
    /// construction; this is asserted once here.
    pub fn regular() -> SynthFont {
        let mut glyphs = BTreeMap::new();
        for label in 'a'..='z' {
            glyphs.insert(label, draw(label));
        }
        let all: Vec<&Vec<u8>> = glyphs.values().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j], "prototype bitmaps must be distinct");
            }
        }
        SynthFont {
            glyphs,
            char_gap: 4,
            word_gap: 12,
            line_gap: 10,
            margin: 8,
        }
    }

    pub fn prototype(&self, label: char) -> Result<&[u8]> {
        self.glyphs
            .get(&label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("font has no prototype for {label:?}")))
    }

    pub fn prototype_image(&self, label: char) -> Result<GrayImage> {
        Ok(GrayImage::from_pixels(
            CELL_W,
            CELL_H,
            self.prototype(label)?.to_vec(),
        ))
    }

    pub fn labels(&self) -> impl Iterator<Item = char> + '_ {
        self.glyphs.keys().copied()
    }

    pub fn cell_width(&self) -> u32 {
        CELL_W
    }

    pub fn cell_height(&self) -> u32 {
        CELL_H
    }
}

//! Glyph patch normalization and appearance ranking.
//!
//! Patches are letterboxed into a fixed square (aspect preserved, bands
//! filled with the patch mean), then shifted to zero mean and scaled to unit
//! Euclidean norm, so the dot product of two normalized patches is their
//! normalized cross-correlation.

use rayon::prelude::*;

use crate::ingest::{GlyphRef, GrayImage};

pub const DEFAULT_PATCH_SIDE: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPatch {
    side: u32,
    values: Vec<f64>,
    /// Set for zero-variance sources; all values are zero and every
    /// correlation against this patch scores 0.
    degenerate: bool,
}

impl NormalizedPatch {
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Resamples `patch` into a `side`x`side` square and normalizes it.
pub fn normalize_patch(patch: &GrayImage, side: u32) -> NormalizedPatch {
    assert!(side > 0, "patch side must be positive");
    let (w, h) = (patch.width() as f64, patch.height() as f64);
    let src_mean = patch.pixels().iter().map(|&p| p as f64).sum::<f64>()
        / (patch.width() as u64 * patch.height() as u64) as f64;

    let scale = (side as f64 / w).min(side as f64 / h);
    let tw = ((w * scale).round() as u32).clamp(1, side);
    let th = ((h * scale).round() as u32).clamp(1, side);
    let ox = (side - tw) / 2;
    let oy = (side - th) / 2;

    let n = (side * side) as usize;
    let mut values = vec![src_mean; n];
    for y in 0..th {
        for x in 0..tw {
            let v = bilinear_sample(patch, x, y, tw, th);
            values[((oy + y) * side + ox + x) as usize] = v;
        }
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    for v in &mut values {
        *v -= mean;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return NormalizedPatch {
            side,
            values: vec![0.0; n],
            degenerate: true,
        };
    }
    for v in &mut values {
        *v /= norm;
    }
    NormalizedPatch {
        side,
        values,
        degenerate: false,
    }
}

/// Bilinear lookup for destination pixel (x, y) of a tw x th resample.
/// Pixel centers map to pixel centers, so identical dimensions copy exactly.
fn bilinear_sample(patch: &GrayImage, x: u32, y: u32, tw: u32, th: u32) -> f64 {
    let (w, h) = (patch.width(), patch.height());
    let sx = ((x as f64 + 0.5) * w as f64 / tw as f64 - 0.5).clamp(0.0, (w - 1) as f64);
    let sy = ((y as f64 + 0.5) * h as f64 / th as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as u32;
    let y0 = sy.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let top = patch.get(x0, y0) as f64 * (1.0 - fx) + patch.get(x1, y0) as f64 * fx;
    let bot = patch.get(x0, y1) as f64 * (1.0 - fx) + patch.get(x1, y1) as f64 * fx;
    top * (1.0 - fy) + bot * fy
}

/// Normalized cross-correlation of two normalized patches, in [-1, 1].
/// Degenerate patches correlate with everything at 0.
pub fn ncc(a: &NormalizedPatch, b: &NormalizedPatch) -> f64 {
    assert_eq!(a.side, b.side, "patch sides must match");
    if a.degenerate || b.degenerate {
        return 0.0;
    }
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum()
}

/// A document's glyphs with precomputed normalized patches, ordered by
/// glyph id regardless of construction order.
pub struct GlyphPool {
    side: u32,
    entries: Vec<PoolEntry>,
}

pub struct PoolEntry {
    pub glyph_id: u32,
    pub word_id: u32,
    pub label: char,
    pub patch: NormalizedPatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedGlyph {
    pub glyph_id: u32,
    pub label: char,
    pub score: f64,
}

impl GlyphPool {
    pub fn build(glyphs: &[GlyphRef], side: u32) -> GlyphPool {
        let mut entries: Vec<PoolEntry> = glyphs
            .par_iter()
            .map(|g| PoolEntry {
                glyph_id: g.glyph_id,
                word_id: g.word_id,
                label: g.label,
                patch: normalize_patch(&g.patch, side),
            })
            .collect();
        entries.sort_by_key(|e| e.glyph_id);
        GlyphPool { side, entries }
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn entry(&self, glyph_id: u32) -> Option<&PoolEntry> {
        self.entries
            .binary_search_by_key(&glyph_id, |e| e.glyph_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// The `m` most similar other glyphs, by descending correlation with
    /// ties broken by ascending glyph id. Pool order never matters.
    pub fn rank_similar(&self, query_id: u32, m: usize) -> Vec<RankedGlyph> {
        let query = self
            .entry(query_id)
            .unwrap_or_else(|| panic!("glyph {query_id} not in pool"));
        let mut ranked: Vec<RankedGlyph> = self
            .entries
            .iter()
            .filter(|e| e.glyph_id != query_id)
            .map(|e| RankedGlyph {
                glyph_id: e.glyph_id,
                label: e.label,
                score: ncc(&query.patch, &e.patch),
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.glyph_id.cmp(&b.glyph_id))
        });
        ranked.truncate(m);
        ranked
    }
}

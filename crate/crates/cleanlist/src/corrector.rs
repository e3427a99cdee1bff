//! Document-specific correction of one confusable pair.
//!
//! The clean list gives us labeled glyph images we can trust, for free: every
//! glyph of an accepted word is almost surely what the engine says it is. We
//! train a linear max-margin classifier on the clean glyphs of one confusable
//! pair and re-score only the suspect instances, i.e. those outside the clean
//! list. Nothing in the clean list is ever touched, and no hand labeling is
//! involved at any point.
//!
//! One hazard to respect: with only a handful of clean glyphs on one side,
//! the boundary inherits that side's sampling noise (which shrinks like
//! 1/n), and at heavy noise fresh glyphs of the thin class can land beyond
//! it. Harvest from a page with a healthy count of both labels, or treat
//! the change list as suggestions.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::GlyphRef;
use crate::similarity::{normalize_patch, NormalizedPatch};
use crate::{Error, Result};

/// Linear two-class scorer over normalized-patch features. Positive score
/// means `labels.0`, negative means `labels.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Feature patch side; `weights` has `side * side` entries.
    pub side: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// (positive label, negative label).
    pub labels: (char, char),
    /// Fraction of training patches the final model classifies correctly.
    pub train_accuracy: f64,
    /// Set when the model does no better than guessing the majority class.
    pub degenerate: bool,
}

impl LinearModel {
    /// Raw decision score for one feature patch.
    pub fn score(&self, patch: &NormalizedPatch) -> f64 {
        debug_assert_eq!(patch.side(), self.side);
        self.bias
            + self
                .weights
                .iter()
                .zip(patch.values())
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

/// A relabeling decision for one glyph. Only actual changes are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub glyph_id: u32,
    pub old_label: char,
    pub new_label: char,
    /// Decision score that forced the change; sign matches `new_label`.
    pub score: f64,
}

/// Trains a hinge-loss linear classifier separating `labels.0` (positive)
/// from `labels.1` (negative) by seeded stochastic subgradient descent with
/// L2 regularization `lambda`. Deterministic for a fixed seed.
pub fn train_pair_classifier(
    labels: (char, char),
    positives: &[NormalizedPatch],
    negatives: &[NormalizedPatch],
    epochs: u32,
    lambda: f64,
    seed: u64,
) -> Result<LinearModel> {
    if labels.0 == labels.1 {
        return Err(Error::Usage(format!(
            "pair labels must be distinct, got '{}' twice",
            labels.0
        )));
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Usage(format!(
            "training needs examples of both labels; got {} '{}' and {} '{}'",
            positives.len(),
            labels.0,
            negatives.len(),
            labels.1
        )));
    }
    if epochs == 0 {
        return Err(Error::Usage("epochs must be at least 1".to_string()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Usage(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let side = positives[0].side();
    let dim = (side * side) as usize;
    if positives
        .iter()
        .chain(negatives)
        .any(|p| p.side() != side)
    {
        return Err(Error::Usage(
            "training patches must all share one side length".to_string(),
        ));
    }

    let examples: Vec<(&NormalizedPatch, f64)> = positives
        .iter()
        .map(|p| (p, 1.0))
        .chain(negatives.iter().map(|p| (p, -1.0)))
        .collect();

    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    // The returned model averages the second half of the iterate path;
    // single iterates wobble with whichever examples were drawn last.
    let mut avg_weights = vec![0.0f64; dim];
    let mut avg_bias = 0.0f64;
    let mut averaged = 0u64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let steps = examples.len() as u64 * epochs as u64;
    for t in 1..=steps {
        // Classes are sampled evenly regardless of size: clean lists are
        // often lopsided (a handful of one label against dozens of the
        // other), and uniform draws would drag the bias toward the big
        // class, flipping every suspect glyph of the small one.
        let (patch, y) = if rng.gen_bool(0.5) {
            (&positives[rng.gen_range(0..positives.len())], 1.0)
        } else {
            (&negatives[rng.gen_range(0..negatives.len())], -1.0)
        };
        let eta = 1.0 / (lambda * t as f64);
        let margin = y * (bias
            + weights
                .iter()
                .zip(patch.values())
                .map(|(w, v)| w * v)
                .sum::<f64>());
        let shrink = 1.0 - eta * lambda;
        if margin < 1.0 {
            for (w, v) in weights.iter_mut().zip(patch.values()) {
                *w = shrink * *w + eta * y * v;
            }
            bias += eta * y;
        } else {
            for w in weights.iter_mut() {
                *w *= shrink;
            }
        }
        if 2 * t > steps {
            for (a, w) in avg_weights.iter_mut().zip(&weights) {
                *a += w;
            }
            avg_bias += bias;
            averaged += 1;
        }
    }
    for a in &mut avg_weights {
        *a /= averaged as f64;
    }
    avg_bias /= averaged as f64;

    let mut model = LinearModel {
        side,
        weights: avg_weights,
        bias: avg_bias,
        labels,
        train_accuracy: 0.0,
        degenerate: false,
    };
    let correct = examples
        .iter()
        .filter(|(p, y)| model.score(p) * y > 0.0)
        .count();
    model.train_accuracy = correct as f64 / examples.len() as f64;
    let majority = positives.len().max(negatives.len()) as f64 / examples.len() as f64;
    model.degenerate = model.train_accuracy <= majority;
    debug_assert!(model.weights.iter().all(|w| w.is_finite()));
    Ok(model)
}

/// Re-scores every glyph carrying either pair label whose word is *not* in
/// the clean list, and returns the relabelings the classifier insists on.
/// A score of exactly zero is not evidence; the engine's label stands.
pub fn apply_corrections(
    model: &LinearModel,
    glyphs: &[GlyphRef],
    clean_word_ids: &BTreeSet<u32>,
) -> Vec<ChangeRecord> {
    let changes: Vec<ChangeRecord> = glyphs
        .par_iter()
        .filter(|g| {
            (g.label == model.labels.0 || g.label == model.labels.1)
                && !clean_word_ids.contains(&g.word_id)
        })
        .filter_map(|g| {
            let score = model.score(&normalize_patch(&g.patch, model.side));
            let new_label = if score > 0.0 {
                model.labels.0
            } else if score < 0.0 {
                model.labels.1
            } else {
                g.label
            };
            (new_label != g.label).then(|| ChangeRecord {
                glyph_id: g.glyph_id,
                old_label: g.label,
                new_label,
                score,
            })
        })
        .collect();
    let changed: BTreeSet<u32> = changes.iter().map(|c| c.glyph_id).collect();
    assert!(
        glyphs
            .iter()
            .filter(|g| changed.contains(&g.glyph_id))
            .all(|g| !clean_word_ids.contains(&g.word_id)),
        "correction touched a clean-list word"
    );
    changes
}

/// Splits a document's glyphs into per-label training sets for `labels`,
/// keeping only glyphs of clean-list words. The (positives, negatives)
/// ordering matches the pair ordering.
pub fn clean_training_sets(
    labels: (char, char),
    glyphs: &[GlyphRef],
    clean_word_ids: &BTreeSet<u32>,
    side: u32,
) -> (Vec<NormalizedPatch>, Vec<NormalizedPatch>) {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for g in glyphs {
        if !clean_word_ids.contains(&g.word_id) {
            continue;
        }
        if g.label == labels.0 {
            positives.push(normalize_patch(&g.patch, side));
        } else if g.label == labels.1 {
            negatives.push(normalize_patch(&g.patch, side));
        }
    }
    (positives, negatives)
}

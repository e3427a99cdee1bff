//! The per-glyph domination check and per-word reliability rule.
//!
//! A glyph is scanned against its ranked look-alikes: after examining the
//! i-th most similar glyph, any label held by more than `theta * (i + 1)` of
//! the glyphs seen so far dominates and the scan stops. A word is reliable
//! only when every one of its glyphs is dominated by its own label.

use serde::{Deserialize, Serialize};

use crate::ingest::OcrWord;
use crate::similarity::RankedGlyph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyParams {
    /// Maximum number of ranked neighbors to examine.
    pub max_neighbors: usize,
    /// Domination threshold as a fraction of glyphs examined (including the
    /// query itself).
    pub theta: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams {
            max_neighbors: 20,
            theta: 0.66,
        }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> crate::Result<()> {
        if self.max_neighbors == 0 {
            return Err(crate::Error::Config(
                "max_neighbors must be at least 1".to_string(),
            ));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(crate::Error::Config(format!(
                "theta must lie strictly between 0 and 1, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominationKind {
    /// A label crossed the threshold and it is the glyph's own label.
    DominatedSame,
    /// A different label crossed the threshold first.
    DominatedOther,
    /// The scan ran out of neighbors without any label dominating.
    Undominated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationOutcome {
    pub kind: DominationKind,
    /// The label that crossed the threshold, when one did.
    pub dominating_label: Option<char>,
    /// Number of neighbors examined when the scan stopped.
    pub stop_index: usize,
}

/// Scans `ranked` in similarity order and reports the first domination
/// event, if any, within the first `max_neighbors` entries.
pub fn dominate_check(
    own_label: char,
    ranked: &[RankedGlyph],
    params: &ConsistencyParams,
) -> DominationOutcome {
    let limit = params.max_neighbors.min(ranked.len());
    // Neighbor labels are a small set in practice; a flat vec of
    // (label, count) beats a map at these sizes.
    let mut counts: Vec<(char, usize)> = Vec::new();
    for i in 0..limit {
        let label = ranked[i].label;
        match counts.iter_mut().find(|(l, _)| *l == label) {
            Some((_, n)) => *n += 1,
            None => counts.push((label, 1)),
        }
        // i neighbors examined so far is i+1 glyphs counting the query.
        let examined = i + 2;
        let mut winner: Option<(char, usize)> = None;
        for &(l, n) in &counts {
            if (n as f64) / (examined as f64) > params.theta {
                let better = match winner {
                    None => true,
                    Some((wl, wn)) => n > wn || (n == wn && l < wl),
                };
                if better {
                    winner = Some((l, n));
                }
            }
        }
        if let Some((label, _)) = winner {
            let kind = if label == own_label {
                DominationKind::DominatedSame
            } else {
                DominationKind::DominatedOther
            };
            return DominationOutcome {
                kind,
                dominating_label: Some(label),
                stop_index: i + 1,
            };
        }
    }
    DominationOutcome {
        kind: DominationKind::Undominated,
        dominating_label: None,
        stop_index: limit,
    }
}

/// A word is reliable when it parsed cleanly, none of its glyphs were
/// skipped (one outcome per character), and every glyph was dominated by its
/// own label.
pub fn word_reliability(word: &OcrWord, outcomes: &[DominationOutcome]) -> bool {
    if word.segmentation_inconsistent {
        return false;
    }
    if outcomes.len() != word.chars.len() {
        return false;
    }
    outcomes
        .iter()
        .all(|o| o.kind == DominationKind::DominatedSame)
}
